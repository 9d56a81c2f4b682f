//! Measurement apertures, synthetic far-field observations with relative
//! Gaussian noise, and the observation file format.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::{forward_map, ForwardError, ScatteringConfig};
use crate::geometry::{ParametricCurve, Point, ShapeName};

pub const FILE_MAGIC: &str = "scatter-bayes-observations";
pub const FILE_VERSION: u32 = 1;
/// Quadrature size used to synthesize data; larger than the inversion grid.
pub const DATA_N_QUAD: usize = 128;
pub const DEFAULT_OBS_SPACING: f64 = TAU / 64.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty aperture: {0}")]
    EmptyAperture(String),
    #[error("invalid aperture `{0}`")]
    InvalidAperture(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("observation file is truncated: missing section `{0}`")]
    MissingSection(&'static str),
    #[error("incompatible observation file version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Observation directions `x̂ = (cos φ, sin φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObservationAperture {
    /// φ ∈ [0, 2π]
    #[serde(rename = "gamma1_o")]
    Gamma1,
    /// φ ∈ [0, π]
    #[serde(rename = "gamma2_o")]
    Gamma2,
    /// φ ∈ [0, π/2]
    #[serde(rename = "gamma3_o")]
    Gamma3,
    #[serde(rename = "custom")]
    Custom { start: f64, end: f64 },
}

impl ObservationAperture {
    /// `(start, width)` of the angular interval.
    pub fn interval(self) -> (f64, f64) {
        match self {
            ObservationAperture::Gamma1 => (0.0, TAU),
            ObservationAperture::Gamma2 => (0.0, PI),
            ObservationAperture::Gamma3 => (0.0, FRAC_PI_2),
            ObservationAperture::Custom { start, end } => (start, end - start),
        }
    }
}

impl fmt::Display for ObservationAperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationAperture::Gamma1 => f.write_str("gamma1_o"),
            ObservationAperture::Gamma2 => f.write_str("gamma2_o"),
            ObservationAperture::Gamma3 => f.write_str("gamma3_o"),
            ObservationAperture::Custom { start, end } => write!(f, "custom {start} {end}"),
        }
    }
}

impl FromStr for ObservationAperture {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        match parts.next() {
            Some("gamma1_o") => Ok(ObservationAperture::Gamma1),
            Some("gamma2_o") => Ok(ObservationAperture::Gamma2),
            Some("gamma3_o") => Ok(ObservationAperture::Gamma3),
            Some("custom") => {
                let nums: Result<Vec<f64>, _> = parts.map(str::parse).collect();
                match nums.as_deref() {
                    Ok([start, end]) => Ok(ObservationAperture::Custom { start: *start, end: *end }),
                    _ => Err(DataError::InvalidAperture(s.to_string())),
                }
            }
            _ => Err(DataError::InvalidAperture(s.to_string())),
        }
    }
}

/// Incident directions `d = (cos θ, sin θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IncidentAperture {
    /// d = (1, 0)
    #[serde(rename = "gamma1_i")]
    Gamma1,
    /// θ ∈ {π/2, 3π/2}
    #[serde(rename = "gamma2_i")]
    Gamma2,
    #[serde(rename = "custom")]
    Custom(Vec<f64>),
}

impl IncidentAperture {
    pub fn angles(&self) -> Vec<f64> {
        match self {
            IncidentAperture::Gamma1 => vec![0.0],
            IncidentAperture::Gamma2 => vec![FRAC_PI_2, 3.0 * FRAC_PI_2],
            IncidentAperture::Custom(a) => a.clone(),
        }
    }
}

impl fmt::Display for IncidentAperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncidentAperture::Gamma1 => f.write_str("gamma1_i"),
            IncidentAperture::Gamma2 => f.write_str("gamma2_i"),
            IncidentAperture::Custom(a) => {
                f.write_str("custom")?;
                for v in a {
                    write!(f, " {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for IncidentAperture {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        match parts.next() {
            Some("gamma1_i") => Ok(IncidentAperture::Gamma1),
            Some("gamma2_i") => Ok(IncidentAperture::Gamma2),
            Some("custom") => parts
                .map(str::parse)
                .collect::<Result<Vec<f64>, _>>()
                .map(IncidentAperture::Custom)
                .map_err(|_| DataError::InvalidAperture(s.to_string())),
            _ => Err(DataError::InvalidAperture(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub obs: ObservationAperture,
    #[serde(default = "default_spacing")]
    pub obs_spacing: f64,
    pub inc: IncidentAperture,
}

fn default_spacing() -> f64 {
    DEFAULT_OBS_SPACING
}

impl ApertureConfig {
    pub fn new(obs: ObservationAperture, inc: IncidentAperture) -> Self {
        Self {
            obs,
            obs_spacing: DEFAULT_OBS_SPACING,
            inc,
        }
    }
}

/// Observation and incident angle lists for an aperture configuration.
///
/// A full circle is sampled without its duplicate endpoint; a proper arc of
/// width `w` gets `floor(w / spacing) + 1` angles starting at its left end.
pub fn observation_angles(apertures: &ApertureConfig) -> Result<(Vec<f64>, Vec<f64>), DataError> {
    let h = apertures.obs_spacing;
    if !(h > 0.0) || !h.is_finite() {
        return Err(DataError::EmptyAperture(format!("observation spacing {h} must be positive")));
    }
    let (start, width) = apertures.obs.interval();
    if !(width >= 0.0) || !start.is_finite() {
        return Err(DataError::EmptyAperture(format!("observation interval {}", apertures.obs)));
    }
    let obs: Vec<f64> = if width >= TAU - 1e-12 {
        let n = (TAU / h).round() as usize;
        (0..n).map(|k| start + TAU * k as f64 / n as f64).collect()
    } else {
        let n = (width / h + 1e-9).floor() as usize + 1;
        (0..n).map(|k| start + h * k as f64).collect()
    };
    let inc = apertures.inc.angles();
    if obs.is_empty() || inc.is_empty() {
        return Err(DataError::EmptyAperture(format!("{} x {}", apertures.obs, apertures.inc)));
    }
    Ok((obs, inc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub eta1: f64,
    pub eta2: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            eta1: 0.0,
            eta2: 0.0,
            seed: 0,
        }
    }
}

/// Ground-truth description carried along for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthMeta {
    pub shape: ShapeName,
    pub center: Point,
}

/// Noisy far-field data with the metadata needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub y: DMatrix<Complex64>,
    pub obs_angles: Vec<f64>,
    pub inc_angles: Vec<f64>,
    pub kappa: f64,
    pub apertures: ApertureConfig,
    pub noise: Option<NoiseConfig>,
    /// Noise scale used by the misfit; `None` when unknown.
    pub sigma: Option<f64>,
    pub truth: Option<TruthMeta>,
}

impl ObservationSet {
    pub fn max_modulus(&self) -> f64 {
        self.y.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// The recorded σ, or `eps · ‖y‖_∞` when none was recorded.
    pub fn effective_sigma(&self, eps: f64) -> f64 {
        match self.sigma {
            Some(s) => s,
            None => eps * self.max_modulus(),
        }
    }
}

/// Synthesizes `y = u∞ + (η₁ζ₁ + iη₂ζ₂)‖u∞‖_∞` with independent standard
/// normal `ζ` per entry, where `‖u∞‖_∞` is the largest modulus over all
/// entries.
pub fn make_observations(
    truth: &ParametricCurve,
    kappa: f64,
    apertures: &ApertureConfig,
    noise: &NoiseConfig,
) -> Result<ObservationSet, DataError> {
    make_observations_with(truth, &ScatteringConfig::new(kappa, DATA_N_QUAD), apertures, noise)
}

/// As [`make_observations`] with an explicit solver configuration.
pub fn make_observations_with(
    truth: &ParametricCurve,
    cfg: &ScatteringConfig,
    apertures: &ApertureConfig,
    noise: &NoiseConfig,
) -> Result<ObservationSet, DataError> {
    if !(noise.eta1 >= 0.0 && noise.eta2 >= 0.0) {
        return Err(DataError::InvalidAperture(format!(
            "noise levels must be nonnegative, got ({}, {})",
            noise.eta1, noise.eta2
        )));
    }
    let (obs, inc) = observation_angles(apertures)?;
    let clean = forward_map(truth, cfg, &obs, &inc)?;
    let scale = clean.max_modulus();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut y = clean.values.clone();
    if noise.eta1 > 0.0 || noise.eta2 > 0.0 {
        for col in 0..y.ncols() {
            for row in 0..y.nrows() {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                y[(row, col)] += Complex64::new(noise.eta1 * z1, noise.eta2 * z2) * scale;
            }
        }
    }
    let level = noise.eta1.max(noise.eta2);
    Ok(ObservationSet {
        y,
        obs_angles: obs,
        inc_angles: inc,
        kappa: cfg.kappa,
        apertures: apertures.clone(),
        noise: Some(*noise),
        sigma: (level > 0.0).then_some(level * scale),
        truth: None,
    })
}

fn fmt_opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Serializes the set in the versioned text format.
pub fn format_observations(set: &ObservationSet) -> String {
    let mut s = String::new();
    s.push_str(FILE_MAGIC);
    s.push('\n');
    s.push_str(&format!("version {FILE_VERSION}\n"));
    s.push_str(&format!("kappa {}\n", set.kappa));
    s.push_str(&format!("obs_aperture {}\n", set.apertures.obs));
    s.push_str(&format!("obs_spacing {}\n", set.apertures.obs_spacing));
    s.push_str(&format!("inc_aperture {}\n", set.apertures.inc));
    match set.noise {
        Some(n) => s.push_str(&format!("noise {} {} {}\n", n.eta1, n.eta2, n.seed)),
        None => s.push_str("noise none\n"),
    }
    s.push_str(&format!("sigma {}\n", fmt_opt(set.sigma)));
    match set.truth {
        Some(t) => s.push_str(&format!("truth {} {} {}\n", t.shape, t.center.x, t.center.y)),
        None => s.push_str("truth none\n"),
    }
    s.push_str(&format!("n_obs {}\n", set.obs_angles.len()));
    s.push_str(&format!("n_inc {}\n", set.inc_angles.len()));
    s.push_str("data\n");
    for (col, inc) in set.inc_angles.iter().enumerate() {
        for (row, obs) in set.obs_angles.iter().enumerate() {
            let v = set.y[(row, col)];
            s.push_str(&format!("{obs} {inc} {} {}\n", v.re, v.im));
        }
    }
    s.push_str("end\n");
    s
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn save_observations(set: &ObservationSet, path: &Path) -> Result<(), DataError> {
    write_atomic(path, &format_observations(set))?;
    Ok(())
}

pub fn load_observations(path: &Path) -> Result<ObservationSet, DataError> {
    parse_observations(&fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, section: &'static str) -> Result<&'a str, DataError> {
        loop {
            let (i, l) = self.inner.next().ok_or(DataError::MissingSection(section))?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Ok(l);
            }
        }
    }

    /// Reads `key rest` and returns `rest`.
    fn field(&mut self, key: &'static str) -> Result<&'a str, DataError> {
        let l = self.next_line(key)?;
        let (k, rest) = l.split_once(' ').unwrap_or((l, ""));
        if k != key {
            return Err(self.err(format!("expected `{key}`, found `{k}`")));
        }
        Ok(rest.trim())
    }

    fn err(&self, message: String) -> DataError {
        DataError::Parse {
            line: self.line,
            message,
        }
    }

    fn parse<T: FromStr>(&self, field: &str, v: &str) -> Result<T, DataError> {
        v.parse()
            .map_err(|_| self.err(format!("cannot parse `{v}` as {field}")))
    }
}

pub fn parse_observations(text: &str) -> Result<ObservationSet, DataError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = lines.next_line("header")?;
    if magic != FILE_MAGIC {
        return Err(lines.err(format!("not an observation file (header `{magic}`)")));
    }
    let version: u32 = {
        let v = lines.field("version")?;
        lines.parse("version", v)?
    };
    if version != FILE_VERSION {
        return Err(DataError::Version {
            found: version,
            expected: FILE_VERSION,
        });
    }
    let kappa: f64 = {
        let v = lines.field("kappa")?;
        lines.parse("kappa", v)?
    };
    let obs_ap: ObservationAperture = {
        let v = lines.field("obs_aperture")?;
        v.parse().map_err(|e: DataError| lines.err(e.to_string()))?
    };
    let obs_spacing: f64 = {
        let v = lines.field("obs_spacing")?;
        lines.parse("obs_spacing", v)?
    };
    let inc_ap: IncidentAperture = {
        let v = lines.field("inc_aperture")?;
        v.parse().map_err(|e: DataError| lines.err(e.to_string()))?
    };
    let noise = {
        let v = lines.field("noise")?;
        if v == "none" {
            None
        } else {
            let parts: Vec<&str> = v.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(lines.err("noise needs `eta1 eta2 seed`".into()));
            }
            Some(NoiseConfig {
                eta1: lines.parse("eta1", parts[0])?,
                eta2: lines.parse("eta2", parts[1])?,
                seed: lines.parse("seed", parts[2])?,
            })
        }
    };
    let sigma = {
        let v = lines.field("sigma")?;
        if v == "none" {
            None
        } else {
            Some(lines.parse::<f64>("sigma", v)?)
        }
    };
    let truth = {
        let v = lines.field("truth")?;
        if v == "none" {
            None
        } else {
            let parts: Vec<&str> = v.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(lines.err("truth needs `shape x y`".into()));
            }
            let shape = parts[0]
                .parse::<ShapeName>()
                .map_err(|e| lines.err(e.to_string()))?;
            Some(TruthMeta {
                shape,
                center: Point::new(lines.parse("x", parts[1])?, lines.parse("y", parts[2])?),
            })
        }
    };
    let n_obs: usize = {
        let v = lines.field("n_obs")?;
        lines.parse("n_obs", v)?
    };
    let n_inc: usize = {
        let v = lines.field("n_inc")?;
        lines.parse("n_inc", v)?
    };
    let d = lines.next_line("data")?;
    if d != "data" {
        return Err(lines.err(format!("expected `data`, found `{d}`")));
    }
    let mut y = DMatrix::<Complex64>::zeros(n_obs, n_inc);
    let mut obs_angles = vec![0.0; n_obs];
    let mut inc_angles = vec![0.0; n_inc];
    for col in 0..n_inc {
        for row in 0..n_obs {
            let l = lines.next_line("data")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(lines.err(format!("data row needs 4 fields, found {}", parts.len())));
            }
            obs_angles[row] = lines.parse("obs_angle", parts[0])?;
            inc_angles[col] = lines.parse("inc_angle", parts[1])?;
            let re: f64 = lines.parse("re", parts[2])?;
            let im: f64 = lines.parse("im", parts[3])?;
            if !re.is_finite() || !im.is_finite() {
                return Err(lines.err("non-finite data entry".into()));
            }
            y[(row, col)] = Complex64::new(re, im);
        }
    }
    let e = lines.next_line("end")?;
    if e != "end" {
        return Err(lines.err(format!("expected `end`, found `{e}`")));
    }
    if let Some(s) = sigma {
        if !(s > 0.0) {
            return Err(lines.err(format!("sigma must be positive, got {s}")));
        }
    }
    Ok(ObservationSet {
        y,
        obs_angles,
        inc_angles,
        kappa,
        apertures: ApertureConfig {
            obs: obs_ap,
            obs_spacing,
            inc: inc_ap,
        },
        noise,
        sigma,
        truth,
    })
}
