//! Preconditioned Crank–Nicolson sampling of the reference Gaussian
//! coefficients, with posterior summaries of the reconstructed boundary.
//!
//! The chain lives on `B ∈ ℝᵐ` with reference measure `N(0, I)`. Each state
//! is pushed through the prior transforms to `Z = D⁻¹ g(B)` and the
//! log-radius `q̃(Z)`, and the data enter only through the potential
//! `Φ(q̃, y) = ‖F(q̃) − y‖² / (2σ²)`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ObservationSet;
use crate::forward::{forward_map, ForwardError, ScatteringConfig};
use crate::geometry::{star_curve, ParametricCurve, Point, StarShapedCurve, DEFAULT_R_MAX};
use crate::prior::{CoupledCoefficients, LogRadius, ReferenceCoefficients, TvPrior};

/// Attempts per step before a solver failure aborts the chain.
pub const MAX_SOLVER_RETRIES: usize = 3;
/// Steps between recomputations of the cached potential.
pub const AUDIT_INTERVAL: usize = 1000;
/// Angular samples used to validate a proposed boundary.
pub const SHAPE_CHECK_POINTS: usize = 256;
/// Angular grid on which summaries are reported.
pub const SUMMARY_GRID: usize = 128;
/// Quadrature size used inside the likelihood.
pub const LIKELIHOOD_N_QUAD: usize = 64;

const ADAPT_WINDOW: usize = 50;
const ADAPT_TARGET: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("chain aborted at step {step}: forward solver failed {MAX_SOLVER_RETRIES} times, last error: {source}")]
    ChainAbort {
        step: usize,
        #[source]
        source: ForwardError,
    },
    #[error("cached potential {cached} differs from recomputed {fresh} at step {step}")]
    CacheMismatch { step: usize, cached: f64, fresh: f64 },
    #[error("initial state has potential {0}; start from a valid shape")]
    InvalidInitialState(f64),
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `B⁰ = 0`, the prior mode.
    #[default]
    Zero,
    /// `B⁰` drawn from the reference measure.
    PriorDraw,
    /// `B⁰` at the posterior mode found by [`map_estimate`]; needs a
    /// far-field target.
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub beta: f64,
    pub n_total: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub thin: usize,
    /// Tune `beta` toward 25% acceptance during burn-in only.
    pub adapt_burn_in: bool,
    pub init: InitialState,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            n_total: 11_000,
            burn_in: 1000,
            seed: 0,
            thin: 1,
            adapt_burn_in: false,
            init: InitialState::Zero,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SamplerError::InvalidConfig(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        if self.burn_in >= self.n_total {
            return Err(SamplerError::InvalidConfig(format!(
                "burn_in = {} must be less than n_total = {}",
                self.burn_in, self.n_total
            )));
        }
        if self.thin == 0 {
            return Err(SamplerError::InvalidConfig("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// The likelihood potential as a function of the coupled coefficients.
pub trait Potential: Sync {
    /// `Φ ≥ 0`, or `+∞` for coefficients that do not describe a valid shape.
    fn potential(&self, z: &CoupledCoefficients) -> Result<f64, ForwardError>;

    /// Posterior mode in reference coordinates, for potentials that can
    /// provide one.
    fn mode(&self, _prior: &TvPrior) -> Option<Result<ReferenceCoefficients, ForwardError>> {
        None
    }
}

/// `Φ ≡ 0`: the chain samples the prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn potential(&self, _z: &CoupledCoefficients) -> Result<f64, ForwardError> {
        Ok(0.0)
    }
}

/// `Σ |F − y|² / (2σ²)` over all entries.
pub fn misfit(predicted: &DMatrix<Complex64>, observed: &DMatrix<Complex64>, sigma: f64) -> f64 {
    assert_eq!(predicted.shape(), observed.shape(), "far-field shape mismatch");
    let ss: f64 = predicted.iter().zip(observed.iter()).map(|(f, y)| (f - y).norm_sqr()).sum();
    ss / (2.0 * sigma * sigma)
}

/// Maps coupled coefficients to star-shaped boundaries about a fixed center.
#[derive(Debug, Clone)]
pub struct ShapeModel {
    pub prior: TvPrior,
    pub center: Point,
    pub r_max: f64,
}

impl ShapeModel {
    pub fn new(prior: TvPrior, center: Point) -> Self {
        Self {
            prior,
            center,
            r_max: DEFAULT_R_MAX,
        }
    }

    pub fn star(&self, z: &CoupledCoefficients) -> StarShapedCurve {
        star_curve(self.center, z, &self.prior.basis, self.prior.config.divide_by_eigenvalue)
            .expect("coefficient count fixed by the prior")
            .with_r_max(self.r_max)
    }
}

/// Far-field misfit against an observation set.
#[derive(Debug, Clone)]
pub struct FarFieldPotential {
    pub model: ShapeModel,
    pub data: ObservationSet,
    pub scattering: ScatteringConfig,
    pub sigma: f64,
}

impl FarFieldPotential {
    /// Uses the recorded noise scale, or `eps · ‖y‖_∞` when none is recorded.
    pub fn new(model: ShapeModel, data: ObservationSet, eps: f64) -> Result<Self, SamplerError> {
        let sigma = data.effective_sigma(eps);
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(SamplerError::InvalidConfig(format!("noise scale sigma = {sigma} must be positive")));
        }
        let scattering = ScatteringConfig::new(data.kappa, LIKELIHOOD_N_QUAD);
        scattering.validate()?;
        Ok(Self {
            model,
            data,
            scattering,
            sigma,
        })
    }

    pub fn with_scattering(mut self, scattering: ScatteringConfig) -> Self {
        self.scattering = scattering;
        self
    }
}

impl FarFieldPotential {
    /// Scaled residuals `(F − y)/σ`, real and imaginary parts interleaved,
    /// or `None` for an invalid shape.
    pub fn residuals(&self, z: &CoupledCoefficients) -> Result<Option<Vec<f64>>, ForwardError> {
        let star = self.model.star(z);
        if star.check(SHAPE_CHECK_POINTS).is_err() {
            return Ok(None);
        }
        let f = forward_map(&star.to_curve(), &self.scattering, &self.data.obs_angles, &self.data.inc_angles)?;
        Ok(Some(
            f.values
                .iter()
                .zip(self.data.y.iter())
                .flat_map(|(f, y)| {
                    let r = (f - y) / self.sigma;
                    [r.re, r.im]
                })
                .collect(),
        ))
    }
}

impl Potential for FarFieldPotential {
    fn potential(&self, z: &CoupledCoefficients) -> Result<f64, ForwardError> {
        let star = self.model.star(z);
        if star.check(SHAPE_CHECK_POINTS).is_err() {
            return Ok(f64::INFINITY);
        }
        let f = forward_map(&star.to_curve(), &self.scattering, &self.data.obs_angles, &self.data.inc_angles)?;
        Ok(misfit(&f.values, &self.data.y, self.sigma))
    }

    fn mode(&self, prior: &TvPrior) -> Option<Result<ReferenceCoefficients, ForwardError>> {
        Some(map_estimate(prior, self))
    }
}

/// Levenberg–Marquardt iterations spent by [`map_estimate`].
pub const MAP_MAX_ITER: usize = 60;

/// Minimizes `Φ(B) + |B|²/2`, the negative log posterior in reference
/// coordinates, by Levenberg–Marquardt with a forward-difference Jacobian.
pub fn map_estimate(prior: &TvPrior, target: &FarFieldPotential) -> Result<ReferenceCoefficients, ForwardError> {
    let m = prior.dim();
    let eval = |b: &[f64]| -> Result<Option<Vec<f64>>, ForwardError> {
        let z = prior.tv_couple(&ReferenceCoefficients::new(b.to_vec()));
        Ok(target.residuals(&z)?.map(|mut r| {
            r.extend_from_slice(b);
            r
        }))
    };
    let cost = |r: &[f64]| 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut b = vec![0.0; m];
    let mut r = eval(&b)?.expect("unit circle is a valid shape");
    let mut c = cost(&r);
    let mut mu = 1e-3;
    for _ in 0..MAP_MAX_ITER {
        let mut jac = DMatrix::<f64>::zeros(r.len(), m);
        for k in 0..m {
            let h = 1e-6 * b[k].abs().max(1.0);
            let mut bp = b.clone();
            bp[k] += h;
            let Some(rp) = eval(&bp)? else {
                continue;
            };
            for (i, (a, o)) in rp.iter().zip(&r).enumerate() {
                jac[(i, k)] = (a - o) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let mut improved = false;
        while mu < 1e12 {
            let mut lhs = jtj.clone();
            for k in 0..m {
                lhs[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&jtr))) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = b.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if let Some(rt) = eval(&trial)? {
                let ct = cost(&rt);
                if ct < c {
                    let rel = (c - ct) / c;
                    b = trial;
                    r = rt;
                    c = ct;
                    mu = (mu / 3.0).max(1e-9);
                    improved = rel > 1e-10;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(ReferenceCoefficients::new(b))
}

/// One state of the chain with its cached potential.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientChainState {
    pub b: ReferenceCoefficients,
    pub z: CoupledCoefficients,
    pub phi: f64,
}

impl CoefficientChainState {
    pub fn new(b: ReferenceCoefficients, prior: &TvPrior, target: &impl Potential) -> Result<Self, ForwardError> {
        let z = prior.tv_couple(&b);
        let phi = target.potential(&z)?;
        Ok(Self { b, z, phi })
    }
}

/// One pCN transition. The uniform variate is drawn on every attempt, so
/// two chains sharing a seed consume identical random streams.
///
/// A forward-solver failure triggers a fresh proposal, up to
/// [`MAX_SOLVER_RETRIES`] attempts.
pub fn pcn_step<R: Rng + ?Sized>(
    state: &CoefficientChainState,
    prior: &TvPrior,
    target: &impl Potential,
    beta: f64,
    rng: &mut R,
) -> Result<(CoefficientChainState, bool), ForwardError> {
    let keep = (1.0 - beta * beta).sqrt();
    let mut last_err = None;
    for _ in 0..MAX_SOLVER_RETRIES {
        let proposal: Vec<f64> = state
            .b
            .as_slice()
            .iter()
            .map(|&b| {
                let xi: f64 = rng.sample(StandardNormal);
                keep * b + beta * xi
            })
            .collect();
        let u: f64 = rng.random();
        let b = ReferenceCoefficients::new(proposal);
        let z = prior.tv_couple(&b);
        let phi = match target.potential(&z) {
            Ok(phi) => phi,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let accept = phi.is_finite() && u.ln() <= state.phi - phi;
        return Ok(if accept {
            (CoefficientChainState { b, z, phi }, true)
        } else {
            (state.clone(), false)
        });
    }
    Err(last_err.expect("at least one attempt"))
}

/// A retained chain state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iteration: usize,
    pub b: ReferenceCoefficients,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub samples: Vec<ChainRecord>,
    /// Potential after every iteration, burn-in included.
    pub phi_trace: Vec<f64>,
    /// Acceptance fraction over the post-burn-in steps.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub final_beta: f64,
}

/// The configured starting point `B⁰`.
pub fn initial_coefficients<R: Rng + ?Sized>(
    prior: &TvPrior,
    target: &impl Potential,
    init: InitialState,
    rng: &mut R,
) -> Result<ReferenceCoefficients, SamplerError> {
    Ok(match init {
        InitialState::Zero => ReferenceCoefficients::zeros(prior.dim()),
        InitialState::PriorDraw => {
            ReferenceCoefficients::new((0..prior.dim()).map(|_| rng.sample(StandardNormal)).collect())
        }
        InitialState::Map => target
            .mode(prior)
            .ok_or_else(|| SamplerError::InvalidConfig("map initialization needs a far-field potential".into()))??,
    })
}

/// Runs `n_total` pCN steps from the configured initial state.
pub fn run_chain(prior: &TvPrior, target: &impl Potential, cfg: &ChainConfig) -> Result<ChainOutput, SamplerError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b0 = initial_coefficients(prior, target, cfg.init, &mut rng)?;
    run_chain_from(prior, target, cfg, b0, rng)
}

fn run_chain_from(
    prior: &TvPrior,
    target: &impl Potential,
    cfg: &ChainConfig,
    b0: ReferenceCoefficients,
    mut rng: ChaCha8Rng,
) -> Result<ChainOutput, SamplerError> {
    let mut state = CoefficientChainState::new(b0, prior, target)?;
    if !state.phi.is_finite() {
        return Err(SamplerError::InvalidInitialState(state.phi));
    }
    let mut beta = cfg.beta;
    let mut samples = Vec::with_capacity((cfg.n_total - cfg.burn_in).div_ceil(cfg.thin));
    let mut phi_trace = Vec::with_capacity(cfg.n_total);
    let (mut acc_burn, mut acc_main, mut window) = (0usize, 0usize, 0usize);
    for step in 1..=cfg.n_total {
        let (next, accepted) =
            pcn_step(&state, prior, target, beta, &mut rng).map_err(|source| SamplerError::ChainAbort { step, source })?;
        state = next;
        phi_trace.push(state.phi);
        let in_burn_in = step <= cfg.burn_in;
        if in_burn_in {
            acc_burn += usize::from(accepted);
            window += usize::from(accepted);
            if cfg.adapt_burn_in && step % ADAPT_WINDOW == 0 {
                let rate = window as f64 / ADAPT_WINDOW as f64;
                beta = (beta * ((rate - ADAPT_TARGET) * 2.0).exp()).clamp(1e-4, 0.99);
                window = 0;
            }
        } else {
            acc_main += usize::from(accepted);
            if (step - cfg.burn_in - 1) % cfg.thin == 0 {
                samples.push(ChainRecord {
                    iteration: step,
                    b: state.b.clone(),
                    phi: state.phi,
                });
            }
        }
        if step % AUDIT_INTERVAL == 0 {
            let fresh = target.potential(&state.z)?;
            if (fresh - state.phi).abs() > 1e-10 * state.phi.abs().max(1.0) {
                return Err(SamplerError::CacheMismatch {
                    step,
                    cached: state.phi,
                    fresh,
                });
            }
        }
    }
    Ok(ChainOutput {
        samples,
        phi_trace,
        acceptance_rate: acc_main as f64 / (cfg.n_total - cfg.burn_in) as f64,
        burn_in_acceptance_rate: if cfg.burn_in == 0 {
            0.0
        } else {
            acc_burn as f64 / cfg.burn_in as f64
        },
        final_beta: beta,
    })
}

/// Runs `n` independent chains, chain `i` seeded with `seed + i`.
pub fn run_chains(
    prior: &TvPrior,
    target: &impl Potential,
    cfg: &ChainConfig,
    n: usize,
) -> Result<Vec<ChainOutput>, SamplerError> {
    cfg.validate()?;
    // The mode is deterministic, so it is found once and shared.
    let shared = match cfg.init {
        InitialState::Map => Some(initial_coefficients(prior, target, cfg.init, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?),
        _ => None,
    };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let cfg = ChainConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            match &shared {
                Some(b0) => run_chain_from(prior, target, &cfg, b0.clone(), ChaCha8Rng::seed_from_u64(cfg.seed)),
                None => run_chain(prior, target, &cfg),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub center: Point,
    pub mean_coefficients: Vec<f64>,
    pub mean_logradius: LogRadius,
    pub theta: Vec<f64>,
    /// `exp` of the pointwise mean of `q̃`.
    pub mean_radius: Vec<f64>,
    pub radius_low: Vec<f64>,
    pub radius_high: Vec<f64>,
    pub band: (f64, f64),
    pub acceptance_rate: f64,
    pub n_samples: usize,
    pub phi: PhiStats,
    pub final_beta: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pools the retained samples of one or more chains.
///
/// Panics if no samples were retained.
pub fn summarize(model: &ShapeModel, chains: &[ChainOutput], band: (f64, f64)) -> PosteriorSummary {
    let prior = &model.prior;
    let records: Vec<&ChainRecord> = chains.iter().flat_map(|c| &c.samples).collect();
    assert!(!records.is_empty(), "no retained samples to summarize");
    let n = records.len();
    let theta: Vec<f64> = (0..SUMMARY_GRID).map(|j| TAU * j as f64 / SUMMARY_GRID as f64).collect();
    let mut mean_z = vec![0.0; prior.dim()];
    let mut q_grid = vec![Vec::with_capacity(n); SUMMARY_GRID];
    for r in &records {
        let z = prior.tv_couple(&r.b);
        for (m, v) in mean_z.iter_mut().zip(z.as_slice()) {
            *m += v;
        }
        let q = prior.logradius(&z);
        for (col, &t) in q_grid.iter_mut().zip(&theta) {
            col.push(q.eval(t));
        }
    }
    for m in &mut mean_z {
        *m /= n as f64;
    }
    let mean_z = CoupledCoefficients::new(mean_z);
    let mean_logradius = prior.logradius(&mean_z);
    let mut mean_radius = Vec::with_capacity(SUMMARY_GRID);
    let mut radius_low = Vec::with_capacity(SUMMARY_GRID);
    let mut radius_high = Vec::with_capacity(SUMMARY_GRID);
    for col in &mut q_grid {
        mean_radius.push((col.iter().sum::<f64>() / n as f64).exp());
        col.sort_by(f64::total_cmp);
        radius_low.push(quantile_sorted(col, band.0).exp());
        radius_high.push(quantile_sorted(col, band.1).exp());
    }
    let phis: Vec<f64> = records.iter().map(|r| r.phi).collect();
    let n_main: f64 = chains.iter().map(|c| c.samples.len() as f64).sum();
    let acceptance_rate = chains
        .iter()
        .map(|c| c.acceptance_rate * c.samples.len() as f64)
        .sum::<f64>()
        / n_main;
    PosteriorSummary {
        center: model.center,
        mean_coefficients: mean_z.into_inner(),
        mean_logradius,
        theta,
        mean_radius,
        radius_low,
        radius_high,
        band,
        acceptance_rate,
        n_samples: n,
        phi: PhiStats {
            mean: phis.iter().sum::<f64>() / n as f64,
            min: phis.iter().copied().fold(f64::INFINITY, f64::min),
            max: phis.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            last: *phis.last().expect("nonempty"),
        },
        final_beta: chains.last().map_or(f64::NAN, |c| c.final_beta),
    }
}

/// The boundary `center + exp(mean q̃(θ)) (cos θ, sin θ)`.
pub fn posterior_mean_curve(summary: &PosteriorSummary, center: Point) -> ParametricCurve {
    StarShapedCurve::new(center, summary.mean_logradius.clone()).to_curve()
}
