//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// `J_n(x) = (1/π) ∫₀^π cos(nτ − x sin τ) dτ`; the integrand extends to a
/// smooth periodic function, so the trapezoid rule converges geometrically.
pub fn bessel_j_quad(n: i32, x: f64) -> f64 {
    let m = 2048;
    let h = PI / m as f64;
    let mut acc = 0.5 * ((0.0f64).cos() + (f64::from(n) * PI).cos());
    for k in 1..m {
        let t = h * k as f64;
        acc += (f64::from(n) * t - x * t.sin()).cos();
    }
    acc * h / PI
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// `Y_n(x)` for `n ∈ {0, 1}` from its integral representation
/// `(1/π)∫₀^π sin(x sin τ − nτ) dτ − (1/π)∫₀^∞ (e^{nt} + (−1)ⁿ e^{−nt}) e^{−x sinh t} dt`.
pub fn bessel_y01_quad(n: i32, x: f64) -> f64 {
    assert!(n == 0 || n == 1);
    let nf = f64::from(n);
    let sign = if n == 0 { 1.0 } else { -1.0 };
    let first = simpson(|t| (x * t.sin() - nf * t).sin(), 0.0, PI, 20_000) / PI;
    let upper = (40.0 / x).asinh() + 1.0;
    let second = simpson(
        |t| ((nf * t).exp() + sign * (-nf * t).exp()) * (-x * t.sinh()).exp(),
        0.0,
        upper,
        200_000,
    ) / PI;
    first - second
}

/// `Y_0 … Y_{n_max}` by upward recurrence, which is stable for `Y`.
pub fn bessel_y_table(n_max: usize, x: f64) -> Vec<f64> {
    let mut y = vec![bessel_y01_quad(0, x), bessel_y01_quad(1, x)];
    for n in 1..n_max {
        let next = 2.0 * n as f64 / x * y[n] - y[n - 1];
        y.push(next);
    }
    y.truncate(n_max + 1);
    y
}

/// Far field of the sound-soft circle of radius `a`, computed with the
/// quadrature Bessel functions above and a fixed number of terms.
pub fn mie_far_field(a: f64, kappa: f64, inc: f64, obs: &[f64], terms: usize) -> Vec<Complex64> {
    let x = kappa * a;
    let ys = bessel_y_table(terms, x);
    let coeffs: Vec<Complex64> = (0..=terms)
        .map(|n| {
            let j = bessel_j_quad(n as i32, x);
            Complex64::new(j, 0.0) / Complex64::new(j, ys[n])
        })
        .collect();
    obs.iter()
        .map(|&phi| {
            let mut acc = coeffs[0];
            for (n, c) in coeffs.iter().enumerate().skip(1) {
                acc += c * (2.0 * (n as f64 * (phi - inc)).cos());
            }
            Complex64::new(0.0, 4.0) * acc
        })
        .collect()
}

pub fn rel_max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` for sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = f64::from(k);
        let term = 2.0 * (-2.0 * kf * kf * lam * lam).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    acc.clamp(0.0, 1.0)
}

pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
