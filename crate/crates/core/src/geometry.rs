//! Boundary representations: the catalog of benchmark obstacles, star-shaped
//! curves built from a truncated log-radius expansion, and shape metrics.
//!
//! Every curve is a closed, counterclockwise, regular map from the parameter
//! interval `[0, 2π)` into the plane. Curves are immutable and cheap to clone;
//! they can be shared freely between likelihood workers.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::Jet;
use crate::prior::{coeffs_to_logradius, CoupledCoefficients, Eigenbasis, LogRadius};

/// Default bound on the radius of a star-shaped reconstruction.
pub const DEFAULT_R_MAX: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown shape `{name}`; valid names are: {}", ShapeName::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))]
    UnknownShape { name: String },
    #[error("invalid star-shaped curve: r({theta:.6}) = {radius} violates 0 < r < {r_max}")]
    InvalidShape { theta: f64, radius: f64, r_max: f64 },
    #[error("coefficient count {got} does not match basis size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// A closed planar curve written over [`Jet`]s so that derivatives are exact.
pub trait Parametrization: Send + Sync {
    /// Position components at parameter `t`.
    fn eval(&self, t: Jet) -> [Jet; 2];
}

/// Position, first and second derivative at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub position: Point,
    pub tangent: Point,
    pub acceleration: Point,
}

/// A general boundary curve.
#[derive(Clone)]
pub struct ParametricCurve {
    shape: Arc<dyn Parametrization>,
    shift: Point,
    corner: Option<f64>,
    label: String,
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("label", &self.label)
            .field("shift", &self.shift)
            .field("corner", &self.corner)
            .finish()
    }
}

impl ParametricCurve {
    pub fn new(label: impl Into<String>, shape: impl Parametrization + 'static) -> Self {
        Self {
            shape: Arc::new(shape),
            shift: Point::ORIGIN,
            corner: None,
            label: label.into(),
        }
    }

    /// Marks the parameter value at which the curve has a corner. The solver
    /// grades its quadrature mesh towards this point.
    pub fn with_corner(mut self, t: f64) -> Self {
        self.corner = Some(t.rem_euclid(TAU));
        self
    }

    pub fn translated(&self, v: Point) -> Self {
        let mut out = self.clone();
        out.shift = self.shift + v;
        out
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn corner(&self) -> Option<f64> {
        self.corner
    }

    /// Evaluates the curve on a jet, applying the translation.
    pub fn eval_jet(&self, t: Jet) -> [Jet; 2] {
        let [x, y] = self.shape.eval(t);
        [x + self.shift.x, y + self.shift.y]
    }

    pub fn sample(&self, t: f64) -> CurveSample {
        let [x, y] = self.eval_jet(Jet::variable(t));
        CurveSample {
            position: Point::new(x.v, y.v),
            tangent: Point::new(x.d1, y.d1),
            acceleration: Point::new(x.d2, y.d2),
        }
    }

    pub fn position(&self, t: f64) -> Point {
        self.sample(t).position
    }

    pub fn tangent(&self, t: f64) -> Point {
        self.sample(t).tangent
    }

    /// `n` points at the equispaced parameters `2πj/n`.
    pub fn points(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|j| self.position(TAU * j as f64 / n as f64))
            .collect()
    }

    /// Signed area by the shoelace formula on `n` samples; positive for
    /// counterclockwise curves.
    pub fn signed_area(&self, n: usize) -> f64 {
        let pts = self.points(n);
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            acc += p.cross(pts[(i + 1) % n]);
        }
        0.5 * acc
    }
}

/// The ten benchmark obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Kite,
    Roundrect,
    Acorn,
    Pear,
    Bean,
    Threelobes,
    Star,
    Cloverleaf,
    Peanut,
    Drop,
}

impl ShapeName {
    pub const ALL: [ShapeName; 10] = [
        ShapeName::Kite,
        ShapeName::Roundrect,
        ShapeName::Acorn,
        ShapeName::Pear,
        ShapeName::Bean,
        ShapeName::Threelobes,
        ShapeName::Star,
        ShapeName::Cloverleaf,
        ShapeName::Peanut,
        ShapeName::Drop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeName::Kite => "kite",
            ShapeName::Roundrect => "roundrect",
            ShapeName::Acorn => "acorn",
            ShapeName::Pear => "pear",
            ShapeName::Bean => "bean",
            ShapeName::Threelobes => "threelobes",
            ShapeName::Star => "star",
            ShapeName::Cloverleaf => "cloverleaf",
            ShapeName::Peanut => "peanut",
            ShapeName::Drop => "drop",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            ShapeName::Kite => "(x1, x2) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)",
            ShapeName::Roundrect => "r(t) = (cos^4 t + (2/3 sin t)^4)^(-1/4)",
            ShapeName::Acorn => "r(t) = 3/5 sqrt(17/4 + 2 cos 3t)",
            ShapeName::Pear => "r(t) = (5 + sin 3t) / 6",
            ShapeName::Bean => "r(t) = 0.4 sqrt(4 cos^2 t + sin^2 t)",
            ShapeName::Threelobes => "r(t) = 0.5 + 0.25 exp(-sin 3t) - 0.1 sin t",
            ShapeName::Star => "r(t) = 1 + 0.3 sin 5t",
            ShapeName::Cloverleaf => "r(t) = 1 + 0.3 cos 4t",
            ShapeName::Peanut => "r(t) = 0.4 sqrt(4 cos^2 t + sin^2 t)",
            ShapeName::Drop => "(x1, x2) = (-1 + 2 sin(t/2), -sin t)",
        }
    }

    /// Whether the catalog entry is given as a radius function about the origin.
    pub fn is_radial(self) -> bool {
        !matches!(self, ShapeName::Kite | ShapeName::Drop)
    }

    /// Names of other entries that share this entry's formula.
    pub fn duplicates(self) -> &'static [ShapeName] {
        match self {
            ShapeName::Bean => &[ShapeName::Peanut],
            ShapeName::Peanut => &[ShapeName::Bean],
            _ => &[],
        }
    }

    /// Radius as a function of the polar angle, for radial entries.
    pub fn radius(self, t: Jet) -> Option<Jet> {
        let r = match self {
            ShapeName::Roundrect => {
                let c4 = t.cos().powi(4);
                let s4 = (t.sin() * (2.0 / 3.0)).powi(4);
                (c4 + s4).powf(-0.25)
            }
            ShapeName::Acorn => ((t * 3.0).cos() * 2.0 + 17.0 / 4.0).sqrt() * 0.6,
            ShapeName::Pear => ((t * 3.0).sin() + 5.0) / 6.0,
            // Bean and Peanut share one formula.
            ShapeName::Bean | ShapeName::Peanut => {
                (t.cos().powi(2) * 4.0 + t.sin().powi(2)).sqrt() * 0.4
            }
            ShapeName::Threelobes => {
                0.5 + (-(t * 3.0).sin()).exp() * 0.25 - t.sin() * 0.1
            }
            ShapeName::Star => 1.0 + (t * 5.0).sin() * 0.3,
            ShapeName::Cloverleaf => 1.0 + (t * 4.0).cos() * 0.3,
            ShapeName::Kite | ShapeName::Drop => return None,
        };
        Some(r)
    }
}

impl fmt::Display for ShapeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeName {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| GeometryError::UnknownShape { name: s.to_string() })
    }
}

struct CatalogCurve(ShapeName);

impl Parametrization for CatalogCurve {
    fn eval(&self, t: Jet) -> [Jet; 2] {
        match self.0 {
            ShapeName::Kite => [
                t.cos() + (t * 2.0).cos() * 0.65 - 0.65,
                t.sin() * 1.5,
            ],
            ShapeName::Drop => [(t * 0.5).sin() * 2.0 - 1.0, -t.sin()],
            name => {
                let r = name.radius(t).expect("radial catalog entry");
                [r * t.cos(), r * t.sin()]
            }
        }
    }
}

/// Looks up a catalog obstacle by its lowercase name.
pub fn catalog_shape(name: &str) -> Result<ParametricCurve, GeometryError> {
    let shape: ShapeName = name.parse()?;
    Ok(shape_curve(shape))
}

pub fn shape_curve(shape: ShapeName) -> ParametricCurve {
    let curve = ParametricCurve::new(shape.as_str(), CatalogCurve(shape));
    match shape {
        // The drop has a corner at (-1, 0), reached at t = 0 and t = 2π.
        ShapeName::Drop => curve.with_corner(0.0),
        _ => curve,
    }
}

/// A circle of radius `a` about `center`.
pub fn circle(a: f64, center: Point) -> ParametricCurve {
    struct Circle(f64);
    impl Parametrization for Circle {
        fn eval(&self, t: Jet) -> [Jet; 2] {
            [t.cos() * self.0, t.sin() * self.0]
        }
    }
    ParametricCurve::new(format!("circle({a})"), Circle(a)).translated(center)
}

/// The unknown boundary `center + exp(q(θ)) (cos θ, sin θ)`.
#[derive(Debug, Clone)]
pub struct StarShapedCurve {
    pub center: Point,
    pub log_radius: LogRadius,
    pub r_max: f64,
}

impl StarShapedCurve {
    pub fn new(center: Point, log_radius: LogRadius) -> Self {
        Self {
            center,
            log_radius,
            r_max: DEFAULT_R_MAX,
        }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.log_radius.eval(theta).exp()
    }

    /// Checks `0 < r < r_max` and finiteness on `n` equispaced angles.
    pub fn check(&self, n: usize) -> Result<(), GeometryError> {
        for j in 0..n {
            let theta = TAU * j as f64 / n as f64;
            let q = self.log_radius.eval(theta);
            let radius = q.exp();
            if !q.is_finite() || !(radius > 0.0 && radius < self.r_max) {
                return Err(GeometryError::InvalidShape {
                    theta,
                    radius,
                    r_max: self.r_max,
                });
            }
        }
        Ok(())
    }

    pub fn to_curve(&self) -> ParametricCurve {
        struct Star(LogRadius);
        impl Parametrization for Star {
            fn eval(&self, t: Jet) -> [Jet; 2] {
                let r = self.0.eval_jet(t).exp();
                [r * t.cos(), r * t.sin()]
            }
        }
        ParametricCurve::new("star-shaped", Star(self.log_radius.clone())).translated(self.center)
    }
}

/// Builds the star-shaped curve whose log-radius is the basis expansion of
/// `coefficients`.
pub fn star_curve(
    center: Point,
    coefficients: &CoupledCoefficients,
    basis: &Eigenbasis,
    divide_by_eigenvalue: bool,
) -> Result<StarShapedCurve, GeometryError> {
    if coefficients.len() != basis.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: basis.len(),
            got: coefficients.len(),
        });
    }
    let q = coeffs_to_logradius(coefficients, basis, divide_by_eigenvalue);
    Ok(StarShapedCurve::new(center, q))
}

/// Symmetric Hausdorff distance between the `n`-point samplings of two curves.
pub fn boundary_discrepancy(a: &ParametricCurve, b: &ParametricCurve, n: usize) -> f64 {
    let pa = a.points(n);
    let pb = b.points(n);
    hausdorff(&pa, &pb)
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

// Early-break scan: stop searching `to` once a point closer than the current
// maximum is found, since it can no longer raise the maximum.
fn directed_hausdorff(from: &[Point], to: &[Point]) -> f64 {
    let mut cmax_sq = 0.0_f64;
    for p in from {
        let mut cmin_sq = f64::INFINITY;
        for q in to {
            let d = p.x - q.x;
            let e = p.y - q.y;
            let dsq = d * d + e * e;
            if dsq < cmax_sq {
                cmin_sq = dsq;
                break;
            }
            cmin_sq = cmin_sq.min(dsq);
        }
        if cmin_sq > cmax_sq {
            cmax_sq = cmin_sq;
        }
    }
    cmax_sq.sqrt()
}

/// Distance from `center` to the curve along the ray at angle `theta`,
/// computed on a dense polygonal approximation. When the ray meets the curve
/// more than once, the farthest crossing is returned.
pub fn radius_along_ray(polygon: &[Point], center: Point, theta: f64) -> Option<f64> {
    let dir = Point::new(theta.cos(), theta.sin());
    let n = polygon.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let p = polygon[i] - center;
        let q = polygon[(i + 1) % n] - center;
        let seg = q - p;
        let denom = dir.cross(seg);
        if denom.abs() < 1e-300 {
            continue;
        }
        // Solve s·dir = p + u·seg.
        let s = p.cross(seg) / denom;
        let u = p.cross(dir) / denom;
        if s >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
    }
    best
}

/// Radii about `center` at each angle, from a polygon of `n_dense` samples.
pub fn radial_profile(curve: &ParametricCurve, center: Point, thetas: &[f64], n_dense: usize) -> Vec<Option<f64>> {
    let polygon = curve.points(n_dense);
    thetas
        .iter()
        .map(|&t| radius_along_ray(&polygon, center, t))
        .collect()
}

/// Polar angle in `[0, 2π)`.
pub fn polar_angle(p: Point) -> f64 {
    p.y.atan2(p.x).rem_euclid(TAU)
}
