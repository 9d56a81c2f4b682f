//! Sound-soft scattering by a Nyström discretization of the combined
//! double- and single-layer boundary integral equation.
//!
//! The scattered field is represented as
//!
//! ```text
//! u^s(x) = ∫_∂Ω { ∂Φ_κ(x,y)/∂ν(y) − iη Φ_κ(x,y) } φ(y) ds(y),
//! Φ_κ(x,y) = (i/4) H₀⁽¹⁾(κ|x − y|),
//! ```
//!
//! and the density solves `φ + Kφ − iηSφ = −2 u^i` on the boundary. After
//! parameterizing the boundary, both kernels are split as
//! `K(t,τ) = K₁(t,τ) ln(4 sin²((t−τ)/2)) + K₂(t,τ)`; the logarithmic part is
//! integrated with trigonometric interpolation weights and the smooth part
//! with the trapezoid rule, which converges spectrally on analytic curves.
//!
//! Curves with a corner are reparameterized by a sigmoidal substitution that
//! clusters nodes at the corner, and the node grid is shifted by half a step
//! so the corner itself is never sampled.

pub mod bessel;
pub mod mie;

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{ParametricCurve, Point};
use crate::jet::Jet;

pub use mie::circle_far_field;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Largest acceptable ratio of extreme pivots in the LU factorization.
pub const MAX_CONDITION: f64 = 1e12;
/// Grading order of the corner substitution.
pub const CORNER_GRADING: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForwardError {
    #[error("invalid scattering configuration: {0}")]
    InvalidConfig(String),
    #[error("boundary integral system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("circle series did not converge within {terms} terms")]
    OracleNonConvergence { terms: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringConfig {
    pub kappa: f64,
    pub n_quad: usize,
    /// Coupling constant `η` of the single-layer part; defaults to `κ`.
    pub coupling: f64,
}

impl ScatteringConfig {
    pub fn new(kappa: f64, n_quad: usize) -> Self {
        Self {
            kappa,
            n_quad,
            coupling: kappa,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn validate(&self) -> Result<(), ForwardError> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(ForwardError::InvalidConfig(format!(
                "wavenumber must be positive, got {}",
                self.kappa
            )));
        }
        if self.n_quad < 16 || self.n_quad % 2 != 0 {
            return Err(ForwardError::InvalidConfig(format!(
                "n_quad must be even and at least 16, got {}",
                self.n_quad
            )));
        }
        if !self.coupling.is_finite() {
            return Err(ForwardError::InvalidConfig("coupling must be finite".into()));
        }
        Ok(())
    }
}

/// Density values at the quadrature nodes of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    pub values: Vec<Complex64>,
    /// Quadrature parameters `s_j` of the nodes.
    pub nodes: Vec<f64>,
}

/// Far-field values indexed by (observation direction, incident direction).
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern {
    pub values: DMatrix<Complex64>,
    pub obs_angles: Vec<f64>,
    pub inc_angles: Vec<f64>,
}

impl FarFieldPattern {
    pub fn n_obs(&self) -> usize {
        self.obs_angles.len()
    }

    pub fn n_inc(&self) -> usize {
        self.inc_angles.len()
    }

    /// Largest entry modulus.
    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Unit vector at angle `phi`.
pub fn direction(phi: f64) -> Point {
    Point::new(phi.cos(), phi.sin())
}

/// Plane wave `e^{iκ x·d}` at the given points.
pub fn plane_wave(points: &[Point], d: Point, kappa: f64) -> Vec<Complex64> {
    points
        .iter()
        .map(|p| Complex64::from_polar(1.0, kappa * p.dot(d)))
        .collect()
}

/// Incident plane wave evaluated at the `n` quadrature nodes of `curve`.
pub fn incident_trace(curve: &ParametricCurve, d: Point, kappa: f64, n: usize) -> Vec<Complex64> {
    let nodes = QuadratureNodes::new(curve, n);
    plane_wave(&nodes.position, d, kappa)
}

/// Sigmoidal substitution `w: [0, 2π] → [0, 2π]` with `w^{(k)}(0) = 0` for
/// `k < p`, clustering nodes near `s = 0`.
fn grading(s: Jet, p: f64) -> Jet {
    let v = |x: Jet| {
        let u = (PI - x) / PI;
        u * u * u * (1.0 / p - 0.5) + (x - PI) / PI * (1.0 / p) + 0.5
    };
    let a = v(s).powf(p);
    let b = v(TAU - s).powf(p);
    a * TAU / (a + b)
}

/// Boundary geometry sampled at the quadrature nodes.
#[derive(Debug, Clone)]
struct QuadratureNodes {
    params: Vec<f64>,
    position: Vec<Point>,
    tangent: Vec<Point>,
    acceleration: Vec<Point>,
    speed: Vec<f64>,
}

impl QuadratureNodes {
    fn new(curve: &ParametricCurve, n: usize) -> Self {
        let corner = curve.corner();
        let offset = if corner.is_some() { 0.5 } else { 0.0 };
        let mut nodes = QuadratureNodes {
            params: Vec::with_capacity(n),
            position: Vec::with_capacity(n),
            tangent: Vec::with_capacity(n),
            acceleration: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
        };
        for j in 0..n {
            let s = TAU * (j as f64 + offset) / n as f64;
            let t = match corner {
                Some(c) => grading(Jet::variable(s), CORNER_GRADING) + c,
                None => Jet::variable(s),
            };
            let [x, y] = curve.eval_jet(t);
            let tangent = Point::new(x.d1, y.d1);
            nodes.params.push(s);
            nodes.position.push(Point::new(x.v, y.v));
            nodes.tangent.push(tangent);
            nodes.acceleration.push(Point::new(x.d2, y.d2));
            nodes.speed.push(tangent.norm());
        }
        nodes
    }
}

/// Logarithmic quadrature weights `R_j(t_i)`, which depend only on `(i − j) mod 2n`:
/// `R(k) = −(2π/n) Σ_{m=1}^{n−1} cos(mkπ/n)/m − (π/n²) cos(kπ)`.
pub fn log_weights(n_quad: usize) -> Vec<f64> {
    let n = n_quad / 2;
    let nf = n as f64;
    (0..n_quad)
        .map(|k| {
            let mut acc = 0.0;
            for m in 1..n {
                acc += (m as f64 * k as f64 * PI / nf).cos() / m as f64;
            }
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            -TAU / nf * acc - PI / (nf * nf) * alt
        })
        .collect()
}

/// A factored Nyström system for one boundary; solves for any number of
/// incident directions.
pub struct NystromSolver {
    cfg: ScatteringConfig,
    nodes: QuadratureNodes,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl NystromSolver {
    pub fn new(curve: &ParametricCurve, cfg: ScatteringConfig) -> Result<Self, ForwardError> {
        cfg.validate()?;
        let nodes = QuadratureNodes::new(curve, cfg.n_quad);
        let matrix = assemble(&nodes, &cfg);
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ForwardError::SingularSystem {
                condition: f64::INFINITY,
            });
        }
        let lu = matrix.lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag
            .iter()
            .map(|v| v.norm())
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(ForwardError::SingularSystem { condition });
        }
        Ok(Self { cfg, nodes, lu })
    }

    pub fn config(&self) -> &ScatteringConfig {
        &self.cfg
    }

    /// Density for the plane wave with direction `d`.
    pub fn solve(&self, d: Point) -> Result<BoundaryDensity, ForwardError> {
        let rhs: Vec<Complex64> = plane_wave(&self.nodes.position, d, self.cfg.kappa)
            .into_iter()
            .map(|v| v * -2.0)
            .collect();
        let sol = self
            .lu
            .solve(&DVector::from_vec(rhs))
            .ok_or(ForwardError::SingularSystem {
                condition: f64::INFINITY,
            })?;
        Ok(BoundaryDensity {
            values: sol.as_slice().to_vec(),
            nodes: self.nodes.params.clone(),
        })
    }

    /// `u∞(x̂) = ∫ (−iκ ν(y)·x̂ − iη) e^{−iκ x̂·y} φ(y) ds(y)`, by the trapezoid rule.
    pub fn far_field(&self, density: &BoundaryDensity, obs_angles: &[f64]) -> Vec<Complex64> {
        far_field_on_nodes(&self.nodes, &self.cfg, density, obs_angles)
    }
}

fn far_field_on_nodes(
    nodes: &QuadratureNodes,
    cfg: &ScatteringConfig,
    density: &BoundaryDensity,
    obs_angles: &[f64],
) -> Vec<Complex64> {
    let n = nodes.position.len();
    let h = TAU / n as f64;
    let kappa = cfg.kappa;
    let eta = cfg.coupling;
    obs_angles
        .iter()
        .map(|&phi| {
            let xhat = direction(phi);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let t = nodes.tangent[j];
                // ν|z'| = (z₂', −z₁')
                let nu_dot = t.y * xhat.x - t.x * xhat.y;
                let weight = Complex64::new(0.0, -(kappa * nu_dot + eta * nodes.speed[j]));
                let phase = Complex64::from_polar(1.0, -kappa * xhat.dot(nodes.position[j]));
                acc += weight * phase * density.values[j];
            }
            acc * h
        })
        .collect()
}

fn assemble(nodes: &QuadratureNodes, cfg: &ScatteringConfig) -> DMatrix<Complex64> {
    let n_quad = nodes.position.len();
    let h = TAU / n_quad as f64;
    let kappa = cfg.kappa;
    let eta = cfg.coupling;
    let weights = log_weights(n_quad);
    let log_sin: Vec<f64> = (0..n_quad)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (4.0 * (PI * k as f64 / n_quad as f64).sin().powi(2)).ln()
            }
        })
        .collect();

    let i_half = Complex64::new(0.0, 0.5);
    let i_eta = Complex64::new(0.0, eta);
    let mut a = DMatrix::<Complex64>::zeros(n_quad, n_quad);

    // Bessel values depend only on |z_i − z_j|; evaluate each pair once.
    let mut bess = vec![[0.0f64; 4]; n_quad * n_quad];
    for i in 0..n_quad {
        for j in (i + 1)..n_quad {
            let kr = kappa * nodes.position[i].dist(nodes.position[j]);
            let v = [libm::j0(kr), libm::y0(kr), libm::j1(kr), libm::y1(kr)];
            bess[i * n_quad + j] = v;
            bess[j * n_quad + i] = v;
        }
    }

    for i in 0..n_quad {
        let zi = nodes.position[i];
        for j in 0..n_quad {
            let k = (i + n_quad - j) % n_quad;
            let speed = nodes.speed[j];
            let (l1, l2, m1, m2) = if i == j {
                let t = nodes.tangent[i];
                let acc = nodes.acceleration[i];
                let l2 = (t.y * acc.x - t.x * acc.y) / (TAU * speed * speed);
                let m1 = -speed / TAU;
                let m2 = Complex64::new(
                    -(EULER_GAMMA + (kappa * speed / 2.0).ln()) / PI * speed,
                    0.5 * speed,
                );
                (0.0, Complex64::new(l2, 0.0), m1, m2)
            } else {
                let zj = nodes.position[j];
                let tj = nodes.tangent[j];
                let diff = zi - zj;
                let r = diff.norm();
                let [j0, y0, j1, y1] = bess[i * n_quad + j];
                // ν(y)·(x − y)|z'(τ)|
                let normal_dot = tj.y * diff.x - tj.x * diff.y;
                let h1 = Complex64::new(j1, y1);
                let h0 = Complex64::new(j0, y0);
                let l = Complex64::new(0.0, kappa / 2.0) * h1 * (normal_dot / r);
                let l1 = -kappa / TAU * normal_dot * j1 / r;
                let m = i_half * h0 * speed;
                let m1 = -j0 * speed / TAU;
                let ls = log_sin[k];
                (l1, l - l1 * ls, m1, m - m1 * ls)
            };
            // K = L − iηM
            let k1 = Complex64::new(l1, 0.0) - i_eta * m1;
            let k2 = l2 - i_eta * m2;
            let mut entry = k1 * weights[k] + k2 * h;
            if i == j {
                entry += 1.0;
            }
            a[(i, j)] = entry;
        }
    }
    a
}

/// Solves the boundary integral equation for the plane wave in direction `d`.
pub fn solve_density(curve: &ParametricCurve, d: Point, cfg: &ScatteringConfig) -> Result<BoundaryDensity, ForwardError> {
    NystromSolver::new(curve, *cfg)?.solve(d)
}

/// Far field of the combined potential with the given density.
pub fn far_field(
    density: &BoundaryDensity,
    curve: &ParametricCurve,
    cfg: &ScatteringConfig,
    obs_angles: &[f64],
) -> Vec<Complex64> {
    let nodes = QuadratureNodes::new(curve, density.values.len());
    far_field_on_nodes(&nodes, cfg, density, obs_angles)
}

/// The shape-to-measurement map: far field on `obs_angles × inc_angles`.
pub fn forward_map(
    curve: &ParametricCurve,
    cfg: &ScatteringConfig,
    obs_angles: &[f64],
    inc_angles: &[f64],
) -> Result<FarFieldPattern, ForwardError> {
    let solver = NystromSolver::new(curve, *cfg)?;
    let mut values = DMatrix::<Complex64>::zeros(obs_angles.len(), inc_angles.len());
    for (col, &theta) in inc_angles.iter().enumerate() {
        let density = solver.solve(direction(theta))?;
        let u = solver.far_field(&density, obs_angles);
        values.set_column(col, &DVector::from_vec(u));
    }
    Ok(FarFieldPattern {
        values,
        obs_angles: obs_angles.to_vec(),
        inc_angles: inc_angles.to_vec(),
    })
}
