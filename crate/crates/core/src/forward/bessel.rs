//! Bessel and Hankel functions of integer order.
//!
//! Thin wrappers over the `libm` ports of the FreeBSD `j0/j1/jn/y0/y1/yn`
//! routines, with domain checks and negative-order reflection.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    J,
    Y,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("Bessel function of the second kind requires x > 0, got x = {x}")]
pub struct BesselDomainError {
    pub x: f64,
}

/// `J_n(x)` for any integer order and real argument.
pub fn bessel_j(order: i32, x: f64) -> f64 {
    match order {
        0 => libm::j0(x),
        1 => libm::j1(x),
        n => libm::jn(n, x),
    }
}

/// `Y_n(x)` for `x > 0`.
pub fn bessel_y(order: i32, x: f64) -> Result<f64, BesselDomainError> {
    if !(x > 0.0) {
        return Err(BesselDomainError { x });
    }
    Ok(match order {
        0 => libm::y0(x),
        1 => libm::y1(x),
        n => libm::yn(n, x),
    })
}

pub fn bessel(kind: BesselKind, order: i32, x: f64) -> Result<f64, BesselDomainError> {
    match kind {
        BesselKind::J => Ok(bessel_j(order, x)),
        BesselKind::Y => bessel_y(order, x),
    }
}

/// Hankel function of the first kind, `H_n⁽¹⁾(x) = J_n(x) + i Y_n(x)`.
pub fn hankel1(order: i32, x: f64) -> Result<Complex64, BesselDomainError> {
    Ok(Complex64::new(bessel_j(order, x), bessel_y(order, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_at_origin() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn y_rejects_nonpositive() {
        assert!(bessel_y(0, 0.0).is_err());
        assert!(bessel(BesselKind::Y, 2, -1.0).is_err());
        assert!(hankel1(1, -0.5).is_err());
    }

    #[test]
    fn hankel_is_j_plus_i_y() {
        for &x in &[0.3, 1.0, 7.25] {
            let h = hankel1(0, x).unwrap();
            assert_eq!(h.re, bessel_j(0, x));
            assert_eq!(h.im, bessel_y(0, x).unwrap());
        }
    }

    #[test]
    fn negative_order_reflection() {
        for n in 1..6 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let x = 2.7;
            assert!((bessel_j(-n, x) - sign * bessel_j(n, x)).abs() < 1e-15);
            assert!((bessel_y(-n, x).unwrap() - sign * bessel_y(n, x).unwrap()).abs() < 1e-14);
        }
    }
}
