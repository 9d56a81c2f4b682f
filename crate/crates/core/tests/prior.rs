mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use scatter_bayes::prior::{
    coeffs_to_logradius, eigenbasis, gauss_to_laplace, laplace_to_gauss, logradius_to_coeffs, prior_sample,
    BasisFunction, CoupledCoefficients, LaplaceCoefficients, PriorConfig, ReferenceCoefficients, TvPrior,
    TvTransform,
};

use common::{ks_pvalue, ks_statistic, laplace_cdf, std_normal_cdf};

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn basis_is_orthonormal() {
    let basis = eigenbasis(&PriorConfig::default());
    let n = 4096;
    let h = TAU / n as f64;
    for (i, fi) in basis.functions.iter().enumerate() {
        for (j, fj) in basis.functions.iter().enumerate() {
            let g: f64 = (0..n).map(|k| fi.eval(h * k as f64) * fj.eval(h * k as f64)).sum::<f64>() * h;
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((g - expected).abs() < 1e-10, "({i}, {j}) = {g}");
        }
    }
}

#[test]
fn eigenvalues_follow_frequency() {
    let basis = eigenbasis(&PriorConfig::default());
    assert_eq!(basis.max_frequency(), 13);
    for (f, &lam) in basis.functions.iter().zip(&basis.eigenvalues) {
        let k = f.frequency();
        let expected = if k == 0 { 1.0 } else { f64::from(k).powf(4.4) };
        assert!((lam - expected).abs() <= 1e-12 * expected);
    }
    assert_eq!(basis.functions[1], BasisFunction::Cos(1));
    assert_eq!(basis.eigenvalues[1], 1.0);
}

// -(1/λ) ln erfc(b/√2) at λ = 0.2, from mpmath with 30 digits.
const G_TAIL: [(f64, f64); 4] = [
    (3.0, 29.572_895_204_752_02),
    (8.0, 171.601_449_896_773),
    (20.0, 1_016.120_040_952_686_6),
    (35.0, 3_081.409_770_406_812_8),
];

#[test]
fn g_reference_values() {
    assert_eq!(gauss_to_laplace(0.0, 0.2), 0.0);
    let b = 0.674_489_750_196_081_7;
    assert!((gauss_to_laplace(b, 0.2) + 5.0 * 0.5f64.ln()).abs() < 1e-12);
    for (b, g) in G_TAIL {
        assert!((gauss_to_laplace(b, 0.2) - g).abs() < 1e-12 * g, "g({b})");
        assert_eq!(gauss_to_laplace(-b, 0.2), -gauss_to_laplace(b, 0.2));
    }
    assert!(gauss_to_laplace(60.0, 0.2).is_finite());
}

#[test]
fn g_inverse_round_trip_on_wide_range() {
    for k in 0..=600 {
        let b = -30.0 + 0.1 * k as f64;
        let back = laplace_to_gauss(gauss_to_laplace(b, 0.2), 0.2);
        assert!((back - b).abs() < 1e-10, "b={b} back={back}");
    }
}

#[test]
fn g_pushes_normal_to_laplace() {
    let draws: Vec<f64> = normals(100_000, 11).into_iter().map(|b| gauss_to_laplace(b, 0.2)).collect();
    let d = ks_statistic(&draws, |x| laplace_cdf(x, 5.0));
    assert!(ks_pvalue(d, draws.len()) > 0.01, "D = {d}");
}

#[test]
fn tv_matrix_small_case() {
    let tv = TvTransform::new(4, 0.1);
    let expected = [
        [1.1, 0.0, 0.0, 0.1],
        [-0.1, 1.1, 0.0, 0.0],
        [0.0, -0.1, 1.1, 0.0],
        [0.0, 0.0, -0.1, 1.1],
    ];
    for i in 0..4 {
        for j in 0..4 {
            assert!((tv.matrix()[(i, j)] - expected[i][j]).abs() < 1e-15);
        }
    }
    let id = tv.matrix() * tv.inverse();
    for i in 0..4 {
        for j in 0..4 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((id[(i, j)] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn tv_norm_matches_expanded_formula() {
    let tv = TvTransform::new(5, 0.1);
    let z: [f64; 5] = [0.3, -1.2, 2.0, 0.7, -0.4];
    let a = 0.1f64;
    let mut expected = ((1.0 + a) * z[0] + a * z[4]).abs();
    for i in 1..5 {
        expected += (z[i] + a * (z[i] - z[i - 1])).abs();
    }
    assert!((tv.tv_norm(&z) - expected).abs() < 1e-14);
}

#[test]
fn tv_couple_pushforward_is_laplace() {
    let prior = TvPrior::new(PriorConfig::default()).unwrap();
    let draws = normals(27 * 3704, 5);
    let mut dz = Vec::with_capacity(draws.len());
    for chunk in draws.chunks_exact(27) {
        let z = prior.tv_couple(&ReferenceCoefficients::new(chunk.to_vec()));
        let a = prior.tv.matrix() * nalgebra::DVector::from_column_slice(z.as_slice());
        dz.extend(a.iter().copied());
    }
    let d = ks_statistic(&dz, |x| laplace_cdf(x, 5.0));
    assert!(ks_pvalue(d, dz.len()) > 0.01, "D = {d}");
}

#[test]
fn zero_alpha_gives_independent_laplace() {
    let tv = TvTransform::new(27, 0.0);
    let a = LaplaceCoefficients::new((0..27).map(|k| k as f64 - 13.0).collect());
    assert_eq!(tv.couple(&a).as_slice(), a.as_slice());
}

#[test]
fn tv_couple_round_trip_and_zero() {
    let prior = TvPrior::new(PriorConfig::default()).unwrap();
    assert!(prior.tv_couple(&ReferenceCoefficients::zeros(27)).as_slice().iter().all(|&v| v == 0.0));
    let draws = normals(27 * 200, 9);
    for chunk in draws.chunks_exact(27) {
        let b = ReferenceCoefficients::new(chunk.to_vec());
        let back = prior.tv_decouple(&prior.tv_couple(&b));
        let err = b.as_slice().iter().zip(back.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}

#[test]
fn tv_norm_equivalence() {
    let tv = TvTransform::new(27, 0.1);
    let draws = normals(27 * 10_000, 3);
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for z in draws.chunks_exact(27) {
        let ratio = tv.tv_norm(z) / z.iter().map(|v| v.abs()).sum::<f64>();
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
    }
    assert!(c1 >= 1.0 - 2.0 * 0.1 && c2 <= 1.0 + 2.0 * 0.1, "[{c1}, {c2}]");
}

#[test]
fn logradius_examples() {
    let cfg = PriorConfig::default();
    let basis = eigenbasis(&cfg);
    let q = coeffs_to_logradius(&CoupledCoefficients::zeros(27), &basis, true);
    assert_eq!(q.eval(1.234), 0.0);
    let mut e = vec![0.0; 27];
    e[1] = 1.0;
    let q = coeffs_to_logradius(&CoupledCoefficients::new(e), &basis, true);
    for &t in &[0.0, 0.5, 2.0] {
        assert!((q.eval(t) - t.cos() / PI.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn projection_round_trip_against_brute_force_fourier() {
    let basis = eigenbasis(&PriorConfig::default());
    let q = |t: f64| 0.1 + 0.3 * (2.0 * t).cos() - 0.05 * (5.0 * t).sin() + 0.02 * (t.cos()).exp();
    for divide in [true, false] {
        let z = logradius_to_coeffs(q, &basis, divide, 512);
        let rebuilt = coeffs_to_logradius(&z, &basis, divide);
        // Brute-force Fourier partial sum to frequency 13 by midpoint rule.
        let n = 20_000;
        let h = TAU / n as f64;
        let coeff = |f: &dyn Fn(f64) -> f64| (0..n).map(|k| q((k as f64 + 0.5) * h) * f((k as f64 + 0.5) * h)).sum::<f64>() * h;
        for &t in &[0.0, 0.7, 3.0, 5.5] {
            let mut brute = coeff(&|_| 1.0) / TAU;
            for k in 1..=13 {
                let kf = k as f64;
                brute += (coeff(&|s| (kf * s).cos()) * (kf * t).cos() + coeff(&|s| (kf * s).sin()) * (kf * t).sin()) / PI;
            }
            assert!((rebuilt.eval(t) - brute).abs() < 1e-9, "divide={divide} t={t}");
            assert!((rebuilt.eval(t) - q(t)).abs() < 1e-6);
        }
    }
}

#[test]
fn prior_sample_statistics() {
    let prior = TvPrior::new(PriorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = prior_sample(&mut rng, &prior);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(a, prior_sample(&mut rng, &prior));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let thetas = [0.0, 1.0, 2.5, 4.0];
    let n = 10_000;
    let mut sums = [0.0; 4];
    let mut sq = [0.0; 4];
    let mut b_all = Vec::new();
    for _ in 0..n {
        let (b, _, q) = prior_sample(&mut rng, &prior);
        for (k, &t) in thetas.iter().enumerate() {
            let v = q.eval(t);
            sums[k] += v;
            sq[k] += v * v;
        }
        b_all.extend_from_slice(b.as_slice());
    }
    for k in 0..4 {
        let mean = sums[k] / n as f64;
        let sd = (sq[k] / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt(), "θ={} mean={mean}", thetas[k]);
    }
    let var = b_all.iter().map(|v| v * v).sum::<f64>() / b_all.len() as f64;
    assert!((0.97..=1.03).contains(&var), "{var}");
    let d = ks_statistic(&b_all[..100_000], std_normal_cdf);
    assert!(ks_pvalue(d, 100_000) > 0.01);
}

#[test]
fn config_rejects_bad_values() {
    for cfg in [
        PriorConfig { s: 0.5, ..Default::default() },
        PriorConfig { lambda: 0.0, ..Default::default() },
        PriorConfig { alpha: 0.0, ..Default::default() },
        PriorConfig { alpha: 0.6, ..Default::default() },
        PriorConfig { m: 0, ..Default::default() },
        PriorConfig { m: 28, ..Default::default() },
    ] {
        assert!(TvPrior::new(cfg).is_err(), "{cfg:?}");
    }
    let parsed: PriorConfig = toml::from_str("s = 2.2\nlambda = 0.2\nalpha = 0.1\nm = 27").unwrap();
    assert_eq!(parsed, PriorConfig::default());
    assert!(toml::from_str::<PriorConfig>("sigma = 1").is_err());
}

proptest! {
    #[test]
    fn g_is_strictly_increasing(a in -30.0..30.0f64, delta in 1e-6..5.0f64) {
        prop_assert!(gauss_to_laplace(a + delta, 0.2) > gauss_to_laplace(a, 0.2));
    }

    #[test]
    fn g_is_odd(b in -40.0..40.0f64, lambda in 0.01..5.0f64) {
        prop_assert_eq!(gauss_to_laplace(-b, lambda), -gauss_to_laplace(b, lambda));
    }
}
