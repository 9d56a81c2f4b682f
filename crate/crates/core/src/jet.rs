//! Second-order forward-mode derivatives.
//!
//! A [`Jet`] carries a value together with its first and second derivative
//! with respect to a single scalar parameter. Curve formulas are written once
//! over jets and yield exact tangents and accelerations, and composing a curve
//! with a reparameterization applies the chain rule automatically.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    /// The independent variable evaluated at `t`.
    pub const fn variable(t: f64) -> Self {
        Self { v: t, d1: 1.0, d2: 0.0 }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            v: f,
            d1: df * self.d1,
            d2: ddf * self.d1 * self.d1 + df * self.d2,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powf(self, p: f64) -> Self {
        let f = self.v.powf(p);
        self.chain(f, p * self.v.powf(p - 1.0), p * (p - 1.0) * self.v.powf(p - 2.0))
    }

    pub fn powi(self, n: i32) -> Self {
        let f = self.v.powi(n);
        let n_f = f64::from(n);
        self.chain(
            f,
            n_f * self.v.powi(n - 1),
            n_f * (n_f - 1.0) * self.v.powi(n - 2),
        )
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = 1.0 / o.v;
        let recip = Jet {
            v: inv,
            d1: -o.d1 * inv * inv,
            d2: (2.0 * o.d1 * o.d1 * inv - o.d2) * inv * inv,
        };
        self * recip
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        Jet { v: self.v + o, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        Jet { v: self.v - o, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        Jet {
            v: self.v * o,
            d1: self.d1 * o,
            d2: self.d2 * o,
        }
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        self * (1.0 / o)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        o + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        -o + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, t: f64) -> (f64, f64) {
        let h = 1e-4;
        let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
        let d2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn composite_matches_finite_differences() {
        let f_jet = |t: Jet| ((t * 3.0).sin() * -1.0).exp() * 0.25 + (t.cos().powi(4) + 0.2).powf(-0.25);
        let f = |t: f64| (-(3.0 * t).sin()).exp() * 0.25 + (t.cos().powi(4) + 0.2).powf(-0.25);
        for &t in &[0.1, 0.7, 2.3, 4.0] {
            let j = f_jet(Jet::variable(t));
            let (d1, d2) = fd(f, t);
            assert!((j.v - f(t)).abs() < 1e-14);
            assert!((j.d1 - d1).abs() < 1e-7, "d1 at {t}");
            assert!((j.d2 - d2).abs() < 1e-5, "d2 at {t}");
        }
    }

    #[test]
    fn division_and_sqrt() {
        let t = Jet::variable(1.3);
        let j = (t * t + 1.0).sqrt() / (t + 2.0);
        let f = |t: f64| (t * t + 1.0).sqrt() / (t + 2.0);
        let (d1, d2) = fd(f, 1.3);
        assert!((j.d1 - d1).abs() < 1e-8);
        assert!((j.d2 - d2).abs() < 1e-6);
    }
}
