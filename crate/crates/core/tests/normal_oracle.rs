//! The quantile against an independent series evaluation of Φ inverted by
//! bisection.

use rabit_core::normal;

/// Φ(x) = 1/2 + φ(x) Σ x^(2n+1) / (1·3·…·(2n+1)); converges for all x and is
/// accurate to rounding for |x| ≤ 4.
fn series_cdf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0;
    while term.abs() > 1e-300 && n < 500.0 {
        term *= x * x / (2.0 * n + 1.0);
        sum += term;
        n += 1.0;
    }
    0.5 + sum * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn series_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-8.0, 8.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if series_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn frozen_quantiles_match_the_series_oracle() {
    for (p, frozen) in [(0.975, 1.959_963_984_540_054), (0.7, 0.524_400_512_708_041_2)] {
        let oracle = series_quantile(p);
        assert!((oracle - frozen).abs() < 1e-12, "oracle {oracle} vs frozen {frozen}");
        assert!((normal::quantile(p).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn quantile_within_1e10_on_a_grid() {
    for i in 1..400 {
        let p = 0.0005 + i as f64 * (0.999 / 400.0);
        let err = (normal::quantile(p).unwrap() - series_quantile(p)).abs();
        assert!(err < 1e-10, "p={p} err={err}");
    }
}

#[test]
fn cdf_matches_series() {
    for i in -40..=40 {
        let x = i as f64 * 0.1;
        assert!((normal::cdf(x) - series_cdf(x)).abs() < 1e-14);
    }
}
