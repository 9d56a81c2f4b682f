fn main() {
    std::process::exit(scatter_bayes::cli::main_with_args(std::env::args_os()));
}
