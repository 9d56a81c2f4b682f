//! Total-variation prior on the log-radius Fourier coefficients.
//!
//! A sample is produced in three stages:
//!
//! 1. reference coefficients `B ~ N(0, I_m)`;
//! 2. each entry is pushed through the monotone map `g` that sends the
//!    standard normal distribution to `Laplace(0, 1/λ)`, giving `A = g(B)`;
//! 3. the entries are coupled by solving `D Z = A` with `D = I + α D₀`,
//!    where `D₀` is the cyclic first-difference matrix.
//!
//! The coupled vector `Z` then weights the eigenfunctions of the periodic
//! fractional diffusion operator to form the truncated log-radius `q̃`.

use std::f64::consts::{LN_2, PI, SQRT_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::Jet;

/// Upper bound (exclusive) on the TV coupling strength.
pub const TV_ALPHA_MAX: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("fractional exponent s = {0} must exceed 1/2")]
    Exponent(f64),
    #[error("Laplace rate lambda = {0} must be positive")]
    Rate(f64),
    #[error("TV strength alpha = {0} must lie in (0, {TV_ALPHA_MAX})")]
    TvAlpha(f64),
    #[error("truncation m = {0} must be odd and at least 1 (constant mode plus cos/sin pairs)")]
    Truncation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub s: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub m: usize,
    /// Divide each coefficient by its eigenvalue when forming `q̃`.
    pub divide_by_eigenvalue: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            s: 2.2,
            lambda: 0.2,
            alpha: 0.1,
            m: 27,
            divide_by_eigenvalue: true,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), PriorError> {
        if !(self.s > 0.5) {
            return Err(PriorError::Exponent(self.s));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(PriorError::Rate(self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < TV_ALPHA_MAX) {
            return Err(PriorError::TvAlpha(self.alpha));
        }
        if self.m == 0 || self.m % 2 == 0 {
            return Err(PriorError::Truncation(self.m));
        }
        Ok(())
    }
}

/// One orthonormal eigenfunction of the periodic diffusion operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFunction {
    Constant,
    Cos(u32),
    Sin(u32),
}

impl BasisFunction {
    pub fn frequency(self) -> u32 {
        match self {
            BasisFunction::Constant => 0,
            BasisFunction::Cos(k) | BasisFunction::Sin(k) => k,
        }
    }

    pub fn eval(self, theta: f64) -> f64 {
        let norm = 1.0 / PI.sqrt();
        match self {
            BasisFunction::Constant => 1.0 / TAU.sqrt(),
            BasisFunction::Cos(k) => norm * (f64::from(k) * theta).cos(),
            BasisFunction::Sin(k) => norm * (f64::from(k) * theta).sin(),
        }
    }
}

/// Truncated eigenpairs, ordered constant, cos θ, sin θ, cos 2θ, sin 2θ, ….
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenbasis {
    pub functions: Vec<BasisFunction>,
    pub eigenvalues: Vec<f64>,
}

impl Eigenbasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn max_frequency(&self) -> u32 {
        self.functions.iter().map(|f| f.frequency()).max().unwrap_or(0)
    }
}

/// Eigenpairs of `-(d²/dθ²)^s` with periodic boundary conditions, truncated
/// to `m` functions. The constant mode, whose true eigenvalue is zero, is
/// assigned eigenvalue 1.
pub fn eigenbasis(cfg: &PriorConfig) -> Eigenbasis {
    let mut functions = Vec::with_capacity(cfg.m);
    let mut eigenvalues = Vec::with_capacity(cfg.m);
    functions.push(BasisFunction::Constant);
    eigenvalues.push(1.0);
    let mut k = 1u32;
    while functions.len() < cfg.m {
        let lam = f64::from(k).powf(2.0 * cfg.s);
        functions.push(BasisFunction::Cos(k));
        eigenvalues.push(lam);
        if functions.len() < cfg.m {
            functions.push(BasisFunction::Sin(k));
            eigenvalues.push(lam);
        }
        k += 1;
    }
    Eigenbasis {
        functions,
        eigenvalues,
    }
}

macro_rules! coefficient_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(entries: Vec<f64>) -> Self {
                Self(entries)
            }

            pub fn zeros(m: usize) -> Self {
                Self(vec![0.0; m])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coefficient_newtype!(
    /// Reference Gaussian coefficients `B`; the pCN chain moves in this space.
    ReferenceCoefficients
);
coefficient_newtype!(
    /// Laplace-distributed coefficients `A = g(B)`.
    LaplaceCoefficients
);
coefficient_newtype!(
    /// TV-coupled coefficients `Z = D⁻¹ A`, which weight the eigenfunctions.
    CoupledCoefficients
);

/// `ln erfc(x)`, accurate in the far right tail where `erfc` underflows.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 20.0 {
        return libm::erfc(x).ln();
    }
    let inv2 = 1.0 / (x * x);
    // Asymptotic series erfc(x) ~ exp(-x²)/(x√π) · Σ (-1)^n (2n-1)!! / (2x²)^n.
    let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2.powi(3) + 6.5625 * inv2.powi(4);
    -x * x - (x * PI.sqrt()).ln() + series.ln()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Natural log of the standard normal upper tail `1 - G(x)`.
pub fn ln_normal_upper_tail(x: f64) -> f64 {
    ln_erfc(x / SQRT_2) - LN_2
}

fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * TAU.ln()
}

/// Acklam's rational approximation of the normal quantile, parameterized by
/// `ln p` so that extreme lower tails stay representable.
fn acklam_quantile(p: f64, ln_p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |ln_tail: f64| {
        let q = (-2.0 * ln_tail).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    if p < P_LOW {
        tail(ln_p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-p).ln_1p())
    }
}

/// The `x` with `ln(1 - G(x)) = ln_tail`: a rational first guess refined by
/// one Newton step on the log tail.
pub fn normal_upper_tail_quantile_ln(ln_tail: f64) -> f64 {
    // 1 - G(x) = p  ⇔  x = -G⁻¹(p).
    let p = ln_tail.exp();
    let mut x = -acklam_quantile(p, ln_tail);
    let residual = ln_normal_upper_tail(x) - ln_tail;
    // d/dx ln(1 - G(x)) = -pdf(x) / (1 - G(x))
    let slope = -(ln_normal_pdf(x) - ln_normal_upper_tail(x)).exp();
    x -= residual / slope;
    x
}

/// Standard normal quantile `G⁻¹(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p >= 0.5 {
        normal_upper_tail_quantile_ln((-p).ln_1p())
    } else {
        -normal_upper_tail_quantile_ln(p.ln())
    }
}

/// The map `g = L⁻¹ ∘ G` sending a standard normal variate to a
/// `Laplace(0, 1/λ)` variate.
///
/// Written as `sign(b) · (-1/λ) · ln erfc(|b|/√2)`, which equals
/// `-(1/λ) sign(b) ln(1 - |2G(b) - 1|)` without cancellation, and stays
/// finite in the tails where `G(b)` rounds to 1.
pub fn gauss_to_laplace(b: f64, lambda: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let magnitude = -ln_erfc(b.abs() / SQRT_2) / lambda;
    magnitude.copysign(b)
}

/// Inverse of [`gauss_to_laplace`].
pub fn laplace_to_gauss(a: f64, lambda: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    // erfc(|b|/√2) = exp(-λ|a|)  ⇔  1 - G(|b|) = exp(-λ|a|) / 2
    let ln_tail = -lambda * a.abs() - LN_2;
    normal_upper_tail_quantile_ln(ln_tail).copysign(a)
}

/// `D = I + α D₀` and its precomputed inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct TvTransform {
    alpha: f64,
    d: DMatrix<f64>,
    d_inv: DMatrix<f64>,
}

impl TvTransform {
    pub fn new(m: usize, alpha: f64) -> Self {
        let d = DMatrix::from_fn(m, m, |i, j| {
            let mut v = if i == j { 1.0 + alpha } else { 0.0 };
            if i == 0 && j == m - 1 && m > 1 {
                v += alpha;
            }
            if i > 0 && j == i - 1 {
                v -= alpha;
            }
            v
        });
        // Strict diagonal dominance for alpha < 1/2 guarantees invertibility.
        let d_inv = d.clone().try_inverse().expect("D = I + αD₀ is invertible");
        Self { alpha, d, d_inv }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.d_inv
    }

    /// `Z = D⁻¹ A`.
    pub fn couple(&self, a: &LaplaceCoefficients) -> CoupledCoefficients {
        let z = &self.d_inv * DVector::from_column_slice(a.as_slice());
        CoupledCoefficients::new(z.as_slice().to_vec())
    }

    /// `A = D Z`.
    pub fn decouple(&self, z: &CoupledCoefficients) -> LaplaceCoefficients {
        let a = &self.d * DVector::from_column_slice(z.as_slice());
        LaplaceCoefficients::new(a.as_slice().to_vec())
    }

    /// `|D z|₁ = |(1+α)z₁ + α z_m| + Σ_{i≥2} |z_i + α(z_i − z_{i−1})|`.
    pub fn tv_norm(&self, z: &[f64]) -> f64 {
        let m = z.len();
        let a = self.alpha;
        let mut acc = ((1.0 + a) * z[0] + if m > 1 { a * z[m - 1] } else { 0.0 }).abs();
        for i in 1..m {
            acc += (z[i] + a * (z[i] - z[i - 1])).abs();
        }
        acc
    }
}

/// The full prior: configuration, eigenbasis and TV transform.
#[derive(Debug, Clone)]
pub struct TvPrior {
    pub config: PriorConfig,
    pub basis: Eigenbasis,
    pub tv: TvTransform,
}

impl TvPrior {
    pub fn new(config: PriorConfig) -> Result<Self, PriorError> {
        config.validate()?;
        Ok(Self {
            basis: eigenbasis(&config),
            tv: TvTransform::new(config.m, config.alpha),
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.m
    }

    pub fn to_laplace(&self, b: &ReferenceCoefficients) -> LaplaceCoefficients {
        LaplaceCoefficients::new(
            b.as_slice()
                .iter()
                .map(|&x| gauss_to_laplace(x, self.config.lambda))
                .collect(),
        )
    }

    /// `Z = D⁻¹ A(B)`.
    pub fn tv_couple(&self, b: &ReferenceCoefficients) -> CoupledCoefficients {
        self.tv.couple(&self.to_laplace(b))
    }

    /// Inverse of [`TvPrior::tv_couple`].
    pub fn tv_decouple(&self, z: &CoupledCoefficients) -> ReferenceCoefficients {
        let a = self.tv.decouple(z);
        ReferenceCoefficients::new(
            a.as_slice()
                .iter()
                .map(|&x| laplace_to_gauss(x, self.config.lambda))
                .collect(),
        )
    }

    pub fn logradius(&self, z: &CoupledCoefficients) -> LogRadius {
        coeffs_to_logradius(z, &self.basis, self.config.divide_by_eigenvalue)
    }

    /// Log prior density of `Z` up to a constant, `-λ |D Z|₁`.
    pub fn log_density(&self, z: &CoupledCoefficients) -> f64 {
        -self.config.lambda * self.tv.tv_norm(z.as_slice())
    }
}

/// A truncated real Fourier series `c₀ + Σ_k (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRadius {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl LogRadius {
    pub fn zero() -> Self {
        Self {
            constant: 0.0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = self.constant;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (s, c) = ((k + 1) as f64 * theta).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    pub fn eval_jet(&self, t: Jet) -> Jet {
        let mut acc = Jet::constant(self.constant);
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kt = t * (k + 1) as f64;
            acc = acc + kt.cos() * *a + kt.sin() * *b;
        }
        acc
    }

    /// Trigonometric interpolant of samples at `θ_j = 2πj/n`, using
    /// frequencies below `n/2`.
    pub fn interpolate(values: &[f64]) -> Self {
        let n = values.len();
        let kmax = n.saturating_sub(1) / 2;
        let mut out = Self {
            constant: values.iter().sum::<f64>() / n.max(1) as f64,
            cos: vec![0.0; kmax],
            sin: vec![0.0; kmax],
        };
        for k in 1..=kmax {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                let (s, c) = (TAU * (k * j) as f64 / n as f64).sin_cos();
                a += v * c;
                b += v * s;
            }
            out.cos[k - 1] = 2.0 * a / n as f64;
            out.sin[k - 1] = 2.0 * b / n as f64;
        }
        out
    }

    pub fn negated(&self) -> Self {
        Self {
            constant: -self.constant,
            cos: self.cos.iter().map(|v| -v).collect(),
            sin: self.sin.iter().map(|v| -v).collect(),
        }
    }
}

/// `q̃(θ) = Σ_k (Z_k / λ_k) ψ_k(θ)`, or `Σ_k Z_k ψ_k(θ)` when
/// `divide_by_eigenvalue` is false.
pub fn coeffs_to_logradius(z: &CoupledCoefficients, basis: &Eigenbasis, divide_by_eigenvalue: bool) -> LogRadius {
    assert_eq!(z.len(), basis.len(), "coefficient/basis length mismatch");
    let kmax = basis.max_frequency() as usize;
    let mut out = LogRadius {
        constant: 0.0,
        cos: vec![0.0; kmax],
        sin: vec![0.0; kmax],
    };
    let cos_norm = 1.0 / PI.sqrt();
    for ((f, &lam), &zk) in basis.functions.iter().zip(&basis.eigenvalues).zip(z.as_slice()) {
        let w = if divide_by_eigenvalue { zk / lam } else { zk };
        match *f {
            BasisFunction::Constant => out.constant += w / TAU.sqrt(),
            BasisFunction::Cos(k) => out.cos[k as usize - 1] += w * cos_norm,
            BasisFunction::Sin(k) => out.sin[k as usize - 1] += w * cos_norm,
        }
    }
    out
}

/// Projects a log-radius function onto the basis with an `n`-point
/// trapezoid rule and returns the coefficients that reproduce it through
/// [`coeffs_to_logradius`].
pub fn logradius_to_coeffs(
    q: impl Fn(f64) -> f64,
    basis: &Eigenbasis,
    divide_by_eigenvalue: bool,
    n: usize,
) -> CoupledCoefficients {
    let h = TAU / n as f64;
    let values: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let t = h * j as f64;
            (t, q(t))
        })
        .collect();
    let entries = basis
        .functions
        .iter()
        .zip(&basis.eigenvalues)
        .map(|(f, &lam)| {
            let proj: f64 = values.iter().map(|&(t, v)| v * f.eval(t)).sum::<f64>() * h;
            if divide_by_eigenvalue {
                proj * lam
            } else {
                proj
            }
        })
        .collect();
    CoupledCoefficients::new(entries)
}

/// Draws `B ~ N(0, I_m)` and returns it with the derived `Z` and `q̃`.
pub fn prior_sample<R: Rng + ?Sized>(
    rng: &mut R,
    prior: &TvPrior,
) -> (ReferenceCoefficients, CoupledCoefficients, LogRadius) {
    let b = ReferenceCoefficients::new((0..prior.dim()).map(|_| rng.sample(StandardNormal)).collect());
    let z = prior.tv_couple(&b);
    let q = prior.logradius(&z);
    (b, z, q)
}
