//! Joint upper tail against direct numerical integration.

use rabit_core::normal;
use rabit_core::sequence::{open_unit, stream_rng};
use rabit_core::tail::{
    joint_upper_tail, joint_upper_tail_with, Backend, JointLaw, TailKernel, TailQuery, TailSettings,
};

/// Composite Simpson on [a, b] with `n` (even) intervals.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// P(X ≥ a, ρX + √(1−ρ²)Z ≥ c) for independent standard normals X, Z.
fn bvn_orthant(a: f64, c: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    simpson(a.max(-12.0), 12.0, 40_000, |x| normal::pdf(x) * normal::sf((c - rho * x) / s))
}

/// Two interims and the pooled statistic, by a 2-D Simpson rule.
fn trivariate(a: [f64; 2], c: f64, rho: [f64; 2]) -> f64 {
    let s = (1.0 - rho[0] * rho[0] - rho[1] * rho[1]).sqrt();
    simpson(a[0].max(-10.0), 10.0, 2000, |x| {
        normal::pdf(x)
            * simpson(a[1].max(-10.0), 10.0, 2000, |y| {
                normal::pdf(y) * normal::sf((c - rho[0] * x - rho[1] * y) / s)
            })
    })
}

fn law(means: &[f64], pooled: f64, rho: &[f64]) -> JointLaw {
    JointLaw::new((0..rho.len()).collect(), means.to_vec(), pooled, rho.to_vec()).unwrap()
}

/// Regression constant for ρ = 0.5, null means, z_t = z* = Z_0.7, frozen from
/// `bvn_orthant` (40 000-interval Simpson) and cross-checked against an
/// independent Genz-type bivariate normal CDF to 1e-15.
const ORTHANT_RHO_HALF: f64 = 0.156_767_320_682_417_8;

#[test]
fn single_survivor_matches_bivariate_orthant() {
    let z = normal::upper_critical(0.3).unwrap();
    let l = law(&[0.0], 0.0, &[0.5]);
    let got = joint_upper_tail(&TailQuery::new(&l, z, z)).unwrap();
    let oracle = bvn_orthant(z, z, 0.5);
    assert!((oracle - ORTHANT_RHO_HALF).abs() < 1e-12);
    assert!((got - oracle).abs() < 1e-7, "got {got} oracle {oracle}");
}

#[test]
fn single_survivor_grid() {
    for &rho in &[0.05, 0.3, 0.5, 0.7, 0.9, 0.97] {
        for &(mu, muv) in &[(0.0, 0.0), (1.25, 0.9), (2.0, 3.0)] {
            for &(zt, zs) in &[(0.5244, 2.2), (-0.5, 1.0), (1.5, 0.0)] {
                let l = law(&[mu], muv, &[rho]);
                let got = joint_upper_tail(&TailQuery::new(&l, zt, zs)).unwrap();
                let oracle = bvn_orthant(zt - mu, zs - muv, rho);
                assert!((got - oracle).abs() < 1e-7, "rho={rho} mu={mu} got={got} oracle={oracle}");
            }
        }
    }
}

#[test]
fn two_survivors_match_trivariate_integral() {
    let cases = [
        ([0.0, 0.0], 0.0, [0.5, 0.5], 0.5244, 2.2),
        ([1.25, 0.3], 1.1, [0.6, 0.3], 0.5244, 1.9),
        ([0.0, 0.0], 0.0, [0.3, 0.1], -1.0, 0.5),
        ([0.5, 0.5], 0.4, [0.68, 0.68], 0.0, 1.0),
    ];
    for (mu, muv, rho, zt, zs) in cases {
        let l = law(&mu, muv, &rho);
        let got = joint_upper_tail(&TailQuery::new(&l, zt, zs)).unwrap();
        let oracle = trivariate([zt - mu[0], zt - mu[1]], zs - muv, rho);
        assert!((got - oracle).abs() < 1e-7, "got={got} oracle={oracle}");
    }
}

#[test]
fn degenerate_two_survivors() {
    // Σρ² = 1: V = ρ1 X1 + ρ2 X2 exactly.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let l = law(&[0.0, 0.0], 0.0, &[r, r]);
    let got = joint_upper_tail(&TailQuery::new(&l, 0.2, 1.0)).unwrap();
    let oracle = simpson(0.2, 12.0, 40_000, |x| {
        normal::pdf(x) * normal::sf(((1.0 - r * x) / r).max(0.2))
    });
    assert!((got - oracle).abs() < 1e-6, "got={got} oracle={oracle}");
}

#[test]
fn quadrature_and_qmc_agree_on_random_queries() {
    let tol = 1e-5;
    let mut rng = stream_rng(2024, 0);
    for q in 0..100 {
        let n = 1 + (q % 4);
        let total = 0.05 + 0.9 * open_unit(&mut rng);
        let raw: Vec<f64> = (0..n).map(|_| 0.2 + open_unit(&mut rng)).collect();
        let norm: f64 = raw.iter().map(|r| r * r).sum::<f64>().sqrt();
        let rho: Vec<f64> = raw.iter().map(|r| r / norm * total.sqrt()).collect();
        let means: Vec<f64> = (0..n).map(|_| 2.0 * open_unit(&mut rng)).collect();
        let pooled = 2.0 * open_unit(&mut rng);
        let zt = -1.0 + 3.0 * open_unit(&mut rng);
        let zs = -1.0 + 4.0 * open_unit(&mut rng);
        let l = law(&means, pooled, &rho);
        let query = TailQuery::new(&l, zt, zs).with_tolerance(tol);
        let quad = joint_upper_tail_with(&query, Backend::Quadrature, 1).unwrap();
        let qmc = joint_upper_tail_with(&query, Backend::QuasiMonteCarlo, 1).unwrap();
        assert!((quad - qmc).abs() <= 2.0 * tol, "query {q}: quad={quad} qmc={qmc}");
    }
}

#[test]
fn monotone_in_both_thresholds() {
    let l = law(&[0.4, 1.1, 0.0], 0.8, &[0.45, 0.3, 0.4]);
    let settings = TailSettings::default();
    let mut prev_row = f64::INFINITY;
    for i in 0..30 {
        let zt = -2.0 + 0.15 * i as f64;
        let kernel = TailKernel::prepare(&l, zt, &settings).unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..60 {
            let v = kernel.eval(-3.0 + 0.1 * j as f64);
            assert!(v <= prev);
            prev = v;
        }
        let at = kernel.eval(1.0);
        assert!(at <= prev_row + 1e-9, "zt={zt}");
        prev_row = at;
    }
}

#[test]
fn infinite_thresholds_are_exact() {
    let l = law(&[0.3, 0.2], 0.1, &[0.4, 0.5]);
    let one = joint_upper_tail(&TailQuery::new(&l, f64::NEG_INFINITY, f64::NEG_INFINITY)).unwrap();
    assert!((one - 1.0).abs() < 1e-15);
    assert_eq!(joint_upper_tail(&TailQuery::new(&l, f64::INFINITY, -1.0)).unwrap(), 0.0);
    assert_eq!(joint_upper_tail(&TailQuery::new(&l, -1.0, f64::INFINITY)).unwrap(), 0.0);
}
