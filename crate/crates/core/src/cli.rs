//! The `scatter-bayes` command-line experiment runner.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    load_observations, make_observations, save_observations, write_atomic, ApertureConfig, DataError, NoiseConfig,
    ObservationSet, TruthMeta,
};
use crate::forward::ForwardError;
use crate::geometry::{
    boundary_discrepancy, circle, radius_along_ray, shape_curve, GeometryError, ParametricCurve, Point, ShapeName,
    StarShapedCurve,
};
use crate::prior::{LogRadius, PriorConfig, PriorError, TvPrior};
use crate::sampler::{
    posterior_mean_curve, run_chains, summarize, ChainConfig, ChainOutput, FarFieldPotential, InitialState,
    PosteriorSummary, SamplerError, ShapeModel, ZeroPotential,
};

/// Samples per curve when measuring boundary discrepancy.
pub const DISCREPANCY_POINTS: usize = 1024;
pub const THREADS_ENV: &str = "SCATTER_BAYES_THREADS";

pub const OBSERVATIONS_FILE: &str = "observations.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHAIN_FILE: &str = "chain.csv";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const LOG_FILE: &str = "reconstruct.log";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("chain aborted: {0}")]
    ChainAbort(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::ChainAbort(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<PriorError> for CliError {
    fn from(e: PriorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ForwardError> for CliError {
    fn from(e: ForwardError) -> Self {
        match e {
            ForwardError::InvalidConfig(m) => CliError::Config(m),
            e => CliError::Solver(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Forward(f) => f.into(),
            DataError::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidConfig(m) => CliError::Config(m),
            SamplerError::Forward(f) => f.into(),
            e => CliError::ChainAbort(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn default_eps() -> f64 {
    0.01
}

fn default_band() -> (f64, f64) {
    (0.05, 0.95)
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shape: ShapeName,
    pub kappa: f64,
    #[serde(default)]
    pub assumed_center: Point,
    #[serde(default)]
    pub true_center: Point,
    pub apertures: ApertureConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    /// Relative noise scale assumed when the data carry no `sigma`.
    #[serde(default = "default_eps")]
    pub sigma_eps: f64,
    /// Lower and upper quantiles of the radius band.
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(CliError::Config(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.sigma_eps > 0.0) {
            return Err(CliError::Config(format!("sigma_eps = {} must be positive", self.sigma_eps)));
        }
        let (lo, hi) = self.band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(CliError::Config(format!("band ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1")));
        }
        if !(self.noise.eta1 >= 0.0 && self.noise.eta2 >= 0.0) {
            return Err(CliError::Config("noise levels must be nonnegative".into()));
        }
        self.prior.validate()?;
        self.chain.validate()?;
        crate::data::observation_angles(&self.apertures)?;
        Ok(())
    }

    pub fn truth_curve(&self) -> ParametricCurve {
        shape_curve(self.shape).translated(self.true_center)
    }
}

/// Synthesizes the observation set for the configured truth.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ObservationSet, CliError> {
    let mut set = make_observations(&cfg.truth_curve(), cfg.kappa, &cfg.apertures, &cfg.noise)?;
    set.truth = Some(TruthMeta {
        shape: cfg.shape,
        center: cfg.true_center,
    });
    Ok(set)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReconstructOptions {
    pub chains: usize,
    pub prior_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub summary: PosteriorSummary,
    pub chains: usize,
    pub seed: u64,
    pub prior_only: bool,
    pub burn_in_acceptance: Vec<f64>,
    /// Against the recorded truth, when known.
    pub discrepancy: Option<f64>,
}

pub struct Reconstruction {
    pub report: ReconstructionReport,
    pub outputs: Vec<ChainOutput>,
    pub truth: Option<ParametricCurve>,
}

pub fn reconstruct(
    cfg: &ExperimentConfig,
    data: &ObservationSet,
    opts: ReconstructOptions,
) -> Result<Reconstruction, CliError> {
    let prior = TvPrior::new(cfg.prior)?;
    let model = ShapeModel::new(prior.clone(), cfg.assumed_center);
    let n = opts.chains.max(1);
    let outputs = if opts.prior_only {
        let chain = ChainConfig {
            init: match cfg.chain.init {
                InitialState::Map => InitialState::Zero,
                other => other,
            },
            ..cfg.chain
        };
        run_chains(&prior, &ZeroPotential, &chain, n)?
    } else {
        let target = FarFieldPotential::new(model.clone(), data.clone(), cfg.sigma_eps)?;
        run_chains(&prior, &target, &cfg.chain, n)?
    };
    let summary = summarize(&model, &outputs, cfg.band);
    let truth = data
        .truth
        .map(|t| shape_curve(t.shape).translated(t.center));
    let discrepancy = truth.as_ref().map(|t| {
        boundary_discrepancy(&posterior_mean_curve(&summary, cfg.assumed_center), t, DISCREPANCY_POINTS)
    });
    Ok(Reconstruction {
        report: ReconstructionReport {
            summary,
            chains: n,
            seed: cfg.chain.seed,
            prior_only: opts.prior_only,
            burn_in_acceptance: outputs.iter().map(|o| o.burn_in_acceptance_rate).collect(),
            discrepancy,
        },
        outputs,
        truth,
    })
}

/// One retained sample per row: chain, iteration, Φ, then the `B` entries.
pub fn format_chain_csv(outputs: &[ChainOutput]) -> String {
    let m = outputs
        .iter()
        .flat_map(|o| o.samples.first())
        .map(|r| r.b.len())
        .next()
        .unwrap_or(0);
    let mut s = String::from("chain,iteration,phi");
    for k in 0..m {
        let _ = write!(s, ",b{k}");
    }
    s.push('\n');
    for (c, o) in outputs.iter().enumerate() {
        for r in &o.samples {
            let _ = write!(s, "{c},{},{}", r.iteration, r.phi);
            for v in r.b.as_slice() {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

/// Per-angle table of the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    pub center: Point,
    pub theta: Vec<f64>,
    pub r_true: Vec<Option<f64>>,
    pub r_mean: Vec<f64>,
    pub r_low: Vec<f64>,
    pub r_high: Vec<f64>,
}

impl BoundaryTable {
    pub fn from_summary(summary: &PosteriorSummary, truth: Option<&ParametricCurve>) -> Self {
        let r_true = match truth {
            Some(t) => {
                let polygon = t.points(4 * DISCREPANCY_POINTS);
                summary
                    .theta
                    .iter()
                    .map(|&th| radius_along_ray(&polygon, summary.center, th))
                    .collect()
            }
            None => vec![None; summary.theta.len()],
        };
        Self {
            center: summary.center,
            theta: summary.theta.clone(),
            r_true,
            r_mean: summary.mean_radius.clone(),
            r_low: summary.radius_low.clone(),
            r_high: summary.radius_high.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# center {} {}\ntheta,r_true,r_mean,r_low,r_high\n", self.center.x, self.center.y);
        for i in 0..self.theta.len() {
            let rt = self.r_true[i].map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{},{rt},{},{},{}",
                self.theta[i], self.r_mean[i], self.r_low[i], self.r_high[i]
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut center = Point::ORIGIN;
        let mut header: Option<Vec<String>> = None;
        let mut table = Self {
            center,
            theta: Vec::new(),
            r_true: Vec::new(),
            r_mean: Vec::new(),
            r_low: Vec::new(),
            r_high: Vec::new(),
        };
        let bad = |line: usize, m: String| CliError::Config(format!("boundary CSV line {line}: {m}"));
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if let ["center", x, y] = parts.as_slice() {
                    center = Point::new(
                        x.parse().map_err(|_| bad(line_no, format!("bad center x `{x}`")))?,
                        y.parse().map_err(|_| bad(line_no, format!("bad center y `{y}`")))?,
                    );
                }
                continue;
            }
            let Some(cols) = &header else {
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                for need in ["theta", "r_mean", "r_low", "r_high"] {
                    if !cols.iter().any(|c| c == need) {
                        return Err(bad(line_no, format!("missing column `{need}`")));
                    }
                }
                header = Some(cols);
                continue;
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(bad(line_no, format!("expected {} fields, found {}", cols.len(), fields.len())));
            }
            let get = |name: &str| -> Result<Option<f64>, CliError> {
                match cols.iter().position(|c| c == name) {
                    None => Ok(None),
                    Some(j) if fields[j].trim().is_empty() => Ok(None),
                    Some(j) => fields[j]
                        .trim()
                        .parse()
                        .map(Some)
                        .map_err(|_| bad(line_no, format!("bad `{name}` value `{}`", fields[j]))),
                }
            };
            let req = |name: &str| -> Result<f64, CliError> {
                get(name)?.ok_or_else(|| bad(line_no, format!("empty `{name}`")))
            };
            table.theta.push(req("theta")?);
            table.r_true.push(get("r_true")?);
            table.r_mean.push(req("r_mean")?);
            table.r_low.push(req("r_low")?);
            table.r_high.push(req("r_high")?);
        }
        if header.is_none() {
            return Err(CliError::Config("boundary CSV has no header".into()));
        }
        table.center = center;
        Ok(table)
    }

    /// Errors unless θ is the uniform grid `2πj/n`.
    pub fn check_grid(&self) -> Result<(), CliError> {
        let n = self.theta.len();
        if n < 3 {
            return Err(CliError::Config(format!("boundary grid has {n} rows; need at least 3")));
        }
        for (j, &t) in self.theta.iter().enumerate() {
            let expected = TAU * j as f64 / n as f64;
            if (t - expected).abs() > 1e-9 {
                return Err(CliError::Config(format!(
                    "boundary grid mismatch at row {j}: theta = {t}, expected {expected} for a uniform {n}-point grid"
                )));
            }
        }
        Ok(())
    }

    /// The star-shaped curve interpolating `r_mean`.
    pub fn mean_curve(&self) -> ParametricCurve {
        let q: Vec<f64> = self.r_mean.iter().map(|r| r.ln()).collect();
        StarShapedCurve::new(self.center, LogRadius::interpolate(&q)).to_curve()
    }
}

/// A truth specification for `evaluate`: a catalog name or `circle:R`.
pub fn parse_truth(spec: &str, center: Point) -> Result<ParametricCurve, CliError> {
    if let Some(r) = spec.strip_prefix("circle:") {
        let a: f64 = r
            .parse()
            .map_err(|_| CliError::Config(format!("bad circle radius `{r}`")))?;
        if !(a > 0.0) {
            return Err(CliError::Config(format!("circle radius {a} must be positive")));
        }
        return Ok(circle(a, center));
    }
    Ok(shape_curve(spec.parse::<ShapeName>()?).translated(center))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub discrepancy: f64,
    pub max_radial_error: f64,
    pub mean_radial_error: f64,
    pub pass: Option<bool>,
}

impl Evaluation {
    pub fn verdict_line(&self) -> String {
        let status = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        format!(
            "{status} discrepancy={:.6} max_radial_error={:.6} mean_radial_error={:.6}",
            self.discrepancy, self.max_radial_error, self.mean_radial_error
        )
    }
}

pub fn evaluate(table: &BoundaryTable, truth: &ParametricCurve, threshold: Option<f64>) -> Result<Evaluation, CliError> {
    table.check_grid()?;
    let polygon = truth.points(4 * DISCREPANCY_POINTS);
    let mut errs = Vec::with_capacity(table.theta.len());
    for (&t, &r) in table.theta.iter().zip(&table.r_mean) {
        let rt = radius_along_ray(&polygon, table.center, t).ok_or_else(|| {
            CliError::Config(format!("truth boundary does not surround the center along theta = {t}"))
        })?;
        errs.push((r - rt).abs());
    }
    let discrepancy = boundary_discrepancy(&table.mean_curve(), truth, DISCREPANCY_POINTS);
    Ok(Evaluation {
        discrepancy,
        max_radial_error: errs.iter().copied().fold(0.0, f64::max),
        mean_radial_error: errs.iter().sum::<f64>() / errs.len() as f64,
        pass: threshold.map(|t| discrepancy < t),
    })
}

fn svg_header(w: f64, h: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn svg_path(points: &[(f64, f64)], close: bool) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(d, "{}{x:.3} {y:.3} ", if i == 0 { "M" } else { "L" });
    }
    if close {
        d.push('Z');
    }
    d
}

/// Overlay of truth, posterior mean and radius band.
pub fn boundary_svg(table: &BoundaryTable) -> String {
    let size = 480.0;
    let polar = |r: &[f64]| -> Vec<(f64, f64)> {
        table
            .theta
            .iter()
            .zip(r)
            .map(|(&t, &r)| (table.center.x + r * t.cos(), table.center.y + r * t.sin()))
            .collect()
    };
    let high = polar(&table.r_high);
    let low = polar(&table.r_low);
    let mean = polar(&table.r_mean);
    let truth: Option<Vec<(f64, f64)>> = table
        .r_true
        .iter()
        .map(|r| *r)
        .collect::<Option<Vec<f64>>>()
        .map(|r| polar(&r));
    let extent = high
        .iter()
        .chain(truth.iter().flatten())
        .map(|(x, y)| x.abs().max(y.abs()))
        .fold(1.0, f64::max)
        * 1.1;
    let scale = size / (2.0 * extent);
    let map = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        pts.iter()
            .map(|(x, y)| (size / 2.0 + x * scale, size / 2.0 - y * scale))
            .collect()
    };
    let mut s = svg_header(size, size);
    let mut band = svg_path(&map(&high), true);
    band.push(' ');
    band.push_str(&svg_path(&map(&low), true));
    let _ = writeln!(s, "<path d=\"{band}\" fill=\"#9ecae1\" fill-opacity=\"0.6\" fill-rule=\"evenodd\" stroke=\"none\"/>");
    if let Some(t) = truth {
        let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>", svg_path(&map(&t), true));
    }
    let _ = writeln!(
        s,
        "<path d=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>",
        svg_path(&map(&mean), true)
    );
    let (cx, cy) = map(&[(table.center.x, table.center.y)])[0];
    let _ = writeln!(s, "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"3\" fill=\"#d62728\"/>");
    s.push_str("</svg>\n");
    s
}

/// Φ against retained-sample index; `None` for an empty chain.
pub fn trace_svg(phis: &[f64]) -> Option<String> {
    if phis.is_empty() {
        return None;
    }
    let (w, h, pad) = (640.0, 320.0, 30.0);
    let lo = phis.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = phis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = phis.len().max(2) - 1;
    let pts: Vec<(f64, f64)> = phis
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            (
                pad + (w - 2.0 * pad) * i as f64 / n as f64,
                h - pad - (h - 2.0 * pad) * (p - lo) / span,
            )
        })
        .collect();
    let mut s = svg_header(w, h);
    let _ = writeln!(
        s,
        "<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\"/>",
        svg_path(&pts, false)
    );
    let _ = writeln!(
        s,
        "<text x=\"{pad}\" y=\"{}\" font-size=\"12\">phi in [{lo:.4}, {hi:.4}]</text>",
        pad - 10.0
    );
    s.push_str("</svg>\n");
    Some(s)
}

/// The `phi` column of a chain CSV.
pub fn parse_chain_phi(text: &str) -> Result<Vec<f64>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("chain file is empty".into()))?;
    let col = header
        .split(',')
        .position(|c| c.trim() == "phi")
        .ok_or_else(|| CliError::Config("chain file has no `phi` column".into()))?;
    lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("chain file row {}: bad phi", i + 2)))
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub duplicates: Vec<&'static str>,
}

pub fn catalog() -> Vec<CatalogEntry> {
    ShapeName::ALL
        .iter()
        .map(|s| CatalogEntry {
            name: s.as_str(),
            formula: s.formula(),
            duplicates: s.duplicates().iter().map(|d| d.as_str()).collect(),
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "scatter-bayes", version, about = "Bayesian obstacle reconstruction from far-field data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic far-field observations for the configured truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the sampler on an observation file.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Observation file; defaults to the one in the output directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides the chain seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Sample the prior instead of the posterior.
        #[arg(long)]
        prior_only: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare a boundary CSV with a catalog shape or `circle:R`.
    Evaluate {
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        truth: String,
        /// Truth center as `x,y`.
        #[arg(long, value_parser = parse_point, default_value = "0,0")]
        true_center: Point,
        /// Discrepancy below which the verdict is PASS.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Write SVG plots of a boundary CSV and, optionally, a chain trace.
    Plot {
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// List the benchmark shapes.
    Catalog {
        #[arg(long)]
        json: bool,
    },
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    Ok(Point::new(
        x.trim().parse().map_err(|_| format!("bad x `{x}`"))?,
        y.trim().parse().map_err(|_| format!("bad y `{y}`"))?,
    ))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Applies `SCATTER_BAYES_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} = `{v}` must be a positive integer")))?;
        // Fails only if the pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Executes a parsed command, returning what it prints on success.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, seed, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.noise.seed = seed;
            }
            let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
            ensure_dir(&dir)?;
            let set = simulate(&cfg)?;
            let path = dir.join(OBSERVATIONS_FILE);
            save_observations(&set, &path)?;
            Ok(format!(
                "wrote {} ({} x {} entries)\n",
                path.display(),
                set.obs_angles.len(),
                set.inc_angles.len()
            ))
        }
        Command::Reconstruct {
            config,
            data,
            seed,
            chains,
            prior_only,
            output,
            json,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.chain.seed = seed;
            }
            if chains == 0 {
                return Err(CliError::Config("--chains must be at least 1".into()));
            }
            let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
            ensure_dir(&dir)?;
            let data_path = data.unwrap_or_else(|| dir.join(OBSERVATIONS_FILE));
            let set = load_observations(&data_path).map_err(|e| match e {
                DataError::Io(io) => io_err(&data_path, io),
                e => CliError::Config(format!("{}: {e}", data_path.display())),
            })?;
            if set.kappa != cfg.kappa {
                return Err(CliError::Config(format!(
                    "observation file has kappa = {} but config has {}",
                    set.kappa, cfg.kappa
                )));
            }
            let rec = match reconstruct(&cfg, &set, ReconstructOptions { chains, prior_only }) {
                Ok(rec) => rec,
                Err(e) => {
                    let _ = write_file(&dir.join(LOG_FILE), &format!("{e}\n"));
                    return Err(e);
                }
            };
            let summary_json =
                serde_json::to_string_pretty(&rec.report).map_err(|e| CliError::Io(e.to_string()))? + "\n";
            write_file(&dir.join(SUMMARY_FILE), &summary_json)?;
            write_file(&dir.join(CHAIN_FILE), &format_chain_csv(&rec.outputs))?;
            let table = BoundaryTable::from_summary(&rec.report.summary, rec.truth.as_ref());
            write_file(&dir.join(BOUNDARY_FILE), &table.to_csv())?;
            if json {
                Ok(summary_json)
            } else {
                let s = &rec.report.summary;
                let mut out = format!(
                    "samples {}  acceptance {:.3}  phi mean {:.3}  beta {:.3e}\n",
                    s.n_samples, s.acceptance_rate, s.phi.mean, s.final_beta
                );
                if let Some(d) = rec.report.discrepancy {
                    let _ = writeln!(out, "discrepancy {d:.6}");
                }
                let _ = writeln!(out, "wrote {}", dir.display());
                Ok(out)
            }
        }
        Command::Evaluate {
            boundary,
            truth,
            true_center,
            threshold,
            json,
        } => {
            let table = BoundaryTable::parse(&read_file(&boundary)?)?;
            let truth = parse_truth(&truth, true_center)?;
            let ev = evaluate(&table, &truth, threshold)?;
            if json {
                Ok(serde_json::to_string(&ev).map_err(|e| CliError::Io(e.to_string()))? + "\n")
            } else {
                Ok(ev.verdict_line() + "\n")
            }
        }
        Command::Plot { boundary, chain, output } => {
            let table = BoundaryTable::parse(&read_file(&boundary)?)?;
            ensure_dir(&output)?;
            let mut out = String::new();
            let path = output.join("boundary.svg");
            write_file(&path, &boundary_svg(&table))?;
            let _ = writeln!(out, "wrote {}", path.display());
            if let Some(chain) = chain {
                let phis = parse_chain_phi(&read_file(&chain)?)?;
                match trace_svg(&phis) {
                    Some(svg) => {
                        let path = output.join("trace.svg");
                        write_file(&path, &svg)?;
                        let _ = writeln!(out, "wrote {}", path.display());
                    }
                    None => eprintln!("warning: chain file has no samples; trace plot omitted"),
                }
            }
            Ok(out)
        }
        Command::Catalog { json } => {
            let entries = catalog();
            if json {
                Ok(serde_json::to_string_pretty(&entries).map_err(|e| CliError::Io(e.to_string()))? + "\n")
            } else {
                let mut s = String::new();
                for e in &entries {
                    let _ = write!(s, "{:<11} {}", e.name, e.formula);
                    if !e.duplicates.is_empty() {
                        let _ = write!(s, "  [same formula as {}]", e.duplicates.join(", "));
                    }
                    s.push('\n');
                }
                Ok(s)
            }
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Solver(String::new()).exit_code(), 3);
        assert_eq!(CliError::ChainAbort(String::new()).exit_code(), 4);
    }

    #[test]
    fn point_flag() {
        assert_eq!(parse_point("0.2,-0.2").unwrap(), Point::new(0.2, -0.2));
        assert!(parse_point("0.2").is_err());
    }

    #[test]
    fn catalog_lists_ten() {
        let c = catalog();
        assert_eq!(c.len(), 10);
        assert_eq!(c.iter().filter(|e| !e.duplicates.is_empty()).count(), 2);
    }

    #[test]
    fn empty_trace_is_omitted() {
        assert!(trace_svg(&[]).is_none());
        assert!(trace_svg(&[1.0, 2.0]).unwrap().contains("<svg"));
    }
}
