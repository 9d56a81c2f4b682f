//! Separation-of-variables far field of a sound-soft circle.

use num_complex::Complex64;

use super::bessel::{bessel_j, bessel_y};
use super::ForwardError;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: i32 = 200;
/// Terms whose modulus falls below this are treated as converged.
pub const TERM_TOLERANCE: f64 = 1e-14;

/// Series coefficients `J_n(κa) / H_n⁽¹⁾(κa)` for `n = 0, 1, …` until they
/// fall below [`TERM_TOLERANCE`].
pub fn circle_coefficients(a: f64, kappa: f64) -> Result<Vec<Complex64>, ForwardError> {
    let x = kappa * a;
    if !(x > 0.0) || !x.is_finite() {
        return Err(ForwardError::InvalidConfig(format!(
            "circle oracle needs κa > 0, got {x}"
        )));
    }
    let mut coeffs = Vec::new();
    for n in 0..=MAX_TERMS {
        let j = bessel_j(n, x);
        let y = bessel_y(n, x).expect("x > 0");
        // J / (J + iY) = 1 / (1 + iY/J)
        let c = if j == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let ratio = y / j;
            Complex64::new(1.0, -ratio) / (1.0 + ratio * ratio)
        };
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(ForwardError::OracleNonConvergence { terms: n });
        }
        let small = c.norm() < TERM_TOLERANCE;
        coeffs.push(c);
        // Require two consecutive small terms so a near-zero of J_n cannot
        // end the series early.
        if small && n > 0 && coeffs[n as usize - 1].norm() < TERM_TOLERANCE && f64::from(n) > x {
            return Ok(coeffs);
        }
    }
    Err(ForwardError::OracleNonConvergence {
        terms: MAX_TERMS,
    })
}

/// Far-field pattern of the sound-soft circle of radius `a` centered at the
/// origin for incident direction angle `inc_angle`, in the normalization
/// `u^s ~ e^{iπ/4}/√(8κπ) · e^{iκr}/√r · u∞`:
///
/// `u∞(φ) = 4i Σ_n J_n(κa)/H_n⁽¹⁾(κa) · e^{in(φ − θ_d)}`.
pub fn circle_far_field(a: f64, kappa: f64, inc_angle: f64, obs_angles: &[f64]) -> Result<Vec<Complex64>, ForwardError> {
    let coeffs = circle_coefficients(a, kappa)?;
    let prefactor = Complex64::new(0.0, 4.0);
    Ok(obs_angles
        .iter()
        .map(|&phi| {
            let delta = phi - inc_angle;
            // c_{-n} = c_n, so pair ±n into cosines; sum small terms first.
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, c) in coeffs.iter().enumerate().skip(1).rev() {
                acc += c * (2.0 * (n as f64 * delta).cos());
            }
            acc += coeffs[0];
            prefactor * acc
        })
        .collect())
}
