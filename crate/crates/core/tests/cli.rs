use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use scatter_bayes::cli::{
    boundary_svg, catalog, evaluate, main_with_args, parse_chain_phi, parse_truth, trace_svg, BoundaryTable,
    CliError, ExperimentConfig, BOUNDARY_FILE, CHAIN_FILE, OBSERVATIONS_FILE, SUMMARY_FILE,
};
use scatter_bayes::data::load_observations;
use scatter_bayes::geometry::{circle, radial_profile, shape_curve, Point, ShapeName};

const BASE: &str = r#"
shape = "pear"
kappa = 1.0

[apertures]
obs = "gamma1_o"
inc = "gamma2_i"

[noise]
eta1 = 0.01
eta2 = 0.01
seed = 1

[chain]
beta = 0.05
n_total = 300
burn_in = 100
seed = 7
"#;

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    let out = format!("kappa = 1.0\noutput_dir = \"{}\"\n", dir.join("out").display());
    fs::write(&path, BASE.replacen("kappa = 1.0\n", &out, 1)).unwrap();
    path.display().to_string()
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["scatter-bayes"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn circle_table(radius: f64, n: usize) -> BoundaryTable {
    let theta: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    BoundaryTable {
        center: Point::ORIGIN,
        r_true: vec![None; n],
        r_mean: vec![radius; n],
        r_low: vec![radius * 0.9; n],
        r_high: vec![radius * 1.1; n],
        theta,
    }
}

#[test]
fn config_parsing_and_validation() {
    let cfg = ExperimentConfig::from_toml(BASE).unwrap();
    assert_eq!(cfg.shape, ShapeName::Pear);
    assert_eq!(cfg.prior.m, 27);
    assert_eq!(cfg.chain.n_total, 300);
    assert_eq!(cfg.band, (0.05, 0.95));

    let unknown = BASE.replacen("kappa = 1.0", "kappa = 1.0\ncolour = 3", 1);
    assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(CliError::Config(_))));
    let bad_kappa = BASE.replacen("kappa = 1.0", "kappa = -1.0", 1);
    assert!(ExperimentConfig::from_toml(&bad_kappa).is_err());
    let bad_chain = BASE.replacen("burn_in = 100", "burn_in = 300", 1);
    assert!(ExperimentConfig::from_toml(&bad_chain).is_err());
    let bad_shape = BASE.replacen("\"pear\"", "\"teapot\"", 1);
    assert!(ExperimentConfig::from_toml(&bad_shape).is_err());
}

#[test]
fn shipped_experiment_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 12);
}

#[test]
fn simulate_reconstruct_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");

    assert_eq!(run(&["simulate", "--config", &cfg]), 0);
    let set = load_observations(&out.join(OBSERVATIONS_FILE)).unwrap();
    assert_eq!((set.y.nrows(), set.y.ncols()), (64, 2));
    assert_eq!(set.truth.unwrap().shape, ShapeName::Pear);

    assert_eq!(run(&["reconstruct", "--config", &cfg]), 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["summary"]["n_samples"], 200);
    assert!(summary["discrepancy"].as_f64().unwrap().is_finite());
    let chain = fs::read_to_string(out.join(CHAIN_FILE)).unwrap();
    assert_eq!(parse_chain_phi(&chain).unwrap().len(), 200);

    let boundary = out.join(BOUNDARY_FILE).display().to_string();
    assert_eq!(run(&["evaluate", "--boundary", &boundary, "--truth", "pear"]), 0);
    assert_eq!(run(&["evaluate", "--boundary", &boundary, "--truth", "teapot"]), 2);

    let plots = dir.path().join("plots");
    let chain_path = out.join(CHAIN_FILE).display().to_string();
    let plots_s = plots.display().to_string();
    assert_eq!(run(&["plot", "--boundary", &boundary, "--chain", &chain_path, "--output", &plots_s]), 0);
    let first = fs::read(plots.join("boundary.svg")).unwrap();
    assert!(plots.join("trace.svg").exists());
    assert_eq!(run(&["plot", "--boundary", &boundary, "--output", &plots_s]), 0);
    assert_eq!(first, fs::read(plots.join("boundary.svg")).unwrap());
}

#[test]
fn reconstruct_without_data_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    assert_eq!(run(&["reconstruct", "--config", &cfg]), 1);
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(run(&["simulate", "--config", "/nonexistent/exp.toml"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["catalog"]), 0);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn concentric_circles_have_known_error() {
    let table = circle_table(1.1, 128);
    let ev = evaluate(&table, &circle(1.0, Point::ORIGIN), Some(0.05)).unwrap();
    assert!((ev.max_radial_error - 0.1).abs() < 1e-6);
    assert!((ev.mean_radial_error - 0.1).abs() < 1e-6);
    assert!((ev.discrepancy - 0.1).abs() < 1e-6);
    assert_eq!(ev.pass, Some(false));
    assert!(ev.verdict_line().starts_with("FAIL"));
}

#[test]
fn truth_against_itself_is_zero() {
    let n = 256;
    let theta: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let kite = shape_curve(ShapeName::Kite);
    let r: Vec<f64> = radial_profile(&kite, Point::ORIGIN, &theta, 8192)
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let table = BoundaryTable {
        center: Point::ORIGIN,
        r_true: r.iter().copied().map(Some).collect(),
        r_low: r.clone(),
        r_high: r.clone(),
        r_mean: r,
        theta,
    };
    let ev = evaluate(&table, &kite, Some(0.05)).unwrap();
    assert!(ev.max_radial_error < 1e-3, "{}", ev.max_radial_error);
    assert!(ev.discrepancy < 0.02, "{}", ev.discrepancy);
    assert_eq!(ev.pass, Some(true));
}

#[test]
fn discrepancy_matches_brute_force_hausdorff() {
    let table = circle_table(1.0, 64);
    let truth = parse_truth("star", Point::ORIGIN).unwrap();
    let ev = evaluate(&table, &truth, None).unwrap();
    let a = table.mean_curve().points(1024);
    let b = truth.points(1024);
    let directed = |p: &[Point], q: &[Point]| {
        p.iter()
            .map(|x| q.iter().map(|y| x.dist(*y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let brute = directed(&a, &b).max(directed(&b, &a));
    assert!((ev.discrepancy - brute).abs() < 1e-12);
    assert_eq!(ev.pass, None);
}

#[test]
fn non_uniform_grid_is_rejected() {
    let mut table = circle_table(1.0, 32);
    table.theta[5] += 0.01;
    assert!(matches!(evaluate(&table, &circle(1.0, Point::ORIGIN), None), Err(CliError::Config(_))));
}

#[test]
fn boundary_csv_round_trip() {
    let mut table = circle_table(1.3, 16);
    table.center = Point::new(0.1, -0.2);
    table.r_true[3] = Some(1.25);
    let back = BoundaryTable::parse(&table.to_csv()).unwrap();
    assert_eq!(back, table);
    assert!(BoundaryTable::parse("").is_err());
    assert!(BoundaryTable::parse("theta,r_mean\n0,1\n").is_err());
    assert!(BoundaryTable::parse("theta,r_mean,r_low,r_high\n0,1,1\n").is_err());
}

#[test]
fn plots_are_deterministic_svg() {
    let table = circle_table(1.0, 64);
    let svg = boundary_svg(&table);
    assert_eq!(svg, boundary_svg(&table));
    assert!(svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(trace_svg(&[]).is_none());
    let trace = trace_svg(&[3.0, 2.0, 2.5]).unwrap();
    assert!(trace.trim_end().ends_with("</svg>"));
}

#[test]
fn catalog_has_ten_shapes() {
    let entries = catalog();
    assert_eq!(entries.len(), 10);
    let json = serde_json::to_value(&entries).unwrap();
    assert!(json.as_array().unwrap().iter().any(|e| e["name"] == "kite"));
    let bean = entries.iter().find(|e| e.name == "bean").unwrap();
    assert_eq!(bean.duplicates, vec!["peanut"]);
}

#[test]
fn circle_truth_spec() {
    assert!(parse_truth("circle:0.5", Point::ORIGIN).is_ok());
    assert!(parse_truth("circle:-1", Point::ORIGIN).is_err());
    assert!(parse_truth("circle:x", Point::ORIGIN).is_err());
}
