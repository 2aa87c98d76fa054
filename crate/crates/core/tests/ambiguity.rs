mod common;

use cldigdt::ambiguity::{
    beta_inverse_cdf, downside_risk, histogram_from_samples, idm_credible_band, idm_probability_interval,
    upside_risk, Binning, Cdf, EmpiricalHistogram, IdmParams, StepCdf, StepRule,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use common::beta_quantile_oracle;

#[test]
fn beta_quantile_matches_integration_oracle() {
    let got = beta_inverse_cdf(0.975, 51.0, 50.0).unwrap();
    let want = beta_quantile_oracle(0.975, 51.0, 50.0);
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn symmetric_counts_give_mirrored_band() {
    let hist = EmpiricalHistogram {
        support: vec![1.0, 2.0],
        counts: vec![50, 50],
        n: 100,
    };
    let b = idm_credible_band(&hist, &IdmParams { lambda: 1.0, gamma: 0.95 }, None).unwrap();
    assert!((b.lower[0] - (1.0 - b.upper[0])).abs() < 1e-12);
}

#[test]
fn band_ends_are_exact() {
    let h = histogram_from_samples(&[3.0, 4.0, 4.0, 7.0], Binning::Raw).unwrap();
    let b = idm_credible_band(&h, &IdmParams::default(), Some((0.0, 10.0))).unwrap();
    assert_eq!(b.lower[0], 0.0);
    assert_eq!(*b.upper.last().unwrap(), 1.0);
    assert_eq!(b.upper[b.grid.iter().position(|&g| g == 7.0).unwrap()], 1.0);
}

#[test]
fn negative_sample_rejected() {
    assert!(histogram_from_samples(&[1.0, -2.0], Binning::Raw).is_err());
}

#[test]
fn step_cdf_risk_matches_riemann_sum() {
    // jumps on quarter points so midpoints never straddle one
    let f = StepCdf {
        grid: vec![0.0, 0.75, 1.5, 2.25, 3.0],
        values: vec![0.1, 0.3, 0.55, 0.8, 1.0],
        rule: StepRule::CarryForward,
    };
    let riemann = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| {
        let n = ((b - a) / 2.5e-6).round() as usize;
        let h = (b - a) / n as f64;
        (0..n).map(|k| g(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let lb = 2.5;
    let down = downside_risk(&f, lb).unwrap();
    assert!((down - riemann(0.0, lb, &|x| f.eval(x))).abs() < 1e-9, "{down}");
    let ub = 0.5;
    let up = upside_risk(&f, ub).unwrap();
    assert!((up - riemann(ub, 3.0, &|x| 1.0 - f.eval(x))).abs() < 1e-9, "{up}");
}

/// Exp(1) samples of size 100; the band should cover F(1) in most trials.
#[test]
fn credible_band_covers_true_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let exp = Exp::new(1.0).unwrap();
    let truth = 1.0 - (-1.0f64).exp();
    let mut hits = 0;
    for _ in 0..200 {
        let samples: Vec<f64> = (0..100).map(|_| exp.sample(&mut rng)).collect();
        let h = histogram_from_samples(&samples, Binning::Raw).unwrap();
        let b = idm_credible_band(&h, &IdmParams::default(), Some((0.0, 20.0))).unwrap();
        if b.lower_cdf().eval(1.0) <= truth && truth <= b.upper_cdf().eval(1.0) {
            hits += 1;
        }
    }
    assert!(hits >= 180, "{hits} of 200");
}

proptest! {
    #[test]
    fn empirical_cdf_inside_interval(n in 1u64..5000, frac in 0.0f64..=1.0, lambda in 0.1f64..10.0) {
        let n_k = ((n as f64) * frac).round() as u64;
        let (lo, hi) = idm_probability_interval(n_k, n, lambda).unwrap();
        let emp = n_k as f64 / n as f64;
        prop_assert!(lo <= emp && emp <= hi);
    }

    #[test]
    fn band_brackets_empirical_cdf(samples in prop::collection::vec(0.0f64..50.0, 2..200)) {
        let h = histogram_from_samples(&samples, Binning::Raw).unwrap();
        let b = idm_credible_band(&h, &IdmParams::default(), None).unwrap();
        let cum = h.cumulative();
        for (k, c) in cum.iter().enumerate() {
            let emp = *c as f64 / h.n as f64;
            prop_assert!(b.lower[k] <= emp + 1e-12 && emp <= b.upper[k] + 1e-12);
        }
    }
}
