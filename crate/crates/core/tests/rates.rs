use emstable::{
    em::CoupledReference,
    harness::{fit_loglog_slope, run_rate_study, theoretical_rate, verdict, RateStudyConfig, Verdict},
    rng::stream,
    wasserstein::CostSpec,
    Error, SdeModel,
};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recovers_noisy_power_laws(seed in any::<u64>(), amp in 0.1f64..10.0) {
        let mut rng = stream(seed, 0);
        let pts: Vec<(f64, f64, f64)> = (4..=9)
            .map(|k| {
                let eta = 2f64.powi(-k);
                let z: f64 = StandardNormal.sample(&mut rng);
                let w = amp * eta.powf(0.667) * (1.0 + 0.05 * z);
                (eta, w, 1.96 * 0.05 * w)
            })
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        // slope SE is about 0.017 at this noise level
        prop_assert!((fit.slope - 0.667).abs() <= 0.1, "slope {}", fit.slope);
        prop_assert!(fit.se.is_finite() && fit.r2 <= 1.0 + 1e-12);
    }

    #[test]
    fn verdict_treats_rates_as_upper_bounds(slope in -1.0f64..3.0, se in 0.0f64..0.2, rate in 0.1f64..1.0) {
        let v = verdict(slope, se, rate);
        prop_assert_eq!(v == Verdict::Violation, slope < rate - 2.0 * se - 0.1);
        if slope - 2.0 * se > rate {
            prop_assert_eq!(v, Verdict::FasterThanBound);
        }
    }
}

#[test]
fn exact_and_offset_power_laws() {
    let etas: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
    let fit = fit_loglog_slope(&etas.iter().map(|&e| (e, e, 0.0)).collect::<Vec<_>>()).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
    let fit = fit_loglog_slope(&etas.iter().map(|&e| (e, 3.0 * e.sqrt(), 0.01)).collect::<Vec<_>>()).unwrap();
    assert!((fit.slope - 0.5).abs() < 1e-12 && (fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(fit_loglog_slope(&[(0.5, 1.0, 0.0), (0.25, -1.0, 0.0), (0.1, 0.0, 0.0)]).is_err());
}

#[test]
fn theoretical_rates() {
    assert!((theoretical_rate(1.5, &CostSpec::Euclidean, 0.0).unwrap() - 1.0 / 1.5).abs() < 1e-15);
    let cut = CostSpec::HoelderCut { gamma: 0.7 };
    assert!((theoretical_rate(1.5, &cut, 0.0).unwrap() - 0.7 / 1.5).abs() < 1e-15);
    assert!((theoretical_rate(0.8, &cut, 0.0).unwrap() - 0.6).abs() < 1e-12);
    assert!((theoretical_rate(0.8, &cut, 0.1).unwrap() - 0.5).abs() < 1e-12);
    assert!(theoretical_rate(0.8, &CostSpec::Euclidean, 0.0).is_err());
}

fn small_ou(seed: u64) -> RateStudyConfig {
    let etas: Vec<f64> = (2..=5).map(|k| 2f64.powi(-k)).collect();
    let mut cfg = RateStudyConfig::new(SdeModel::ou(1, 1.5).unwrap(), CostSpec::Euclidean, etas, 4000, CoupledReference::OuAnalytic, seed);
    cfg.burn_in_time = 8.0;
    cfg.n_boot = 50;
    cfg
}

#[test]
fn ou_study_is_reproducible_and_monotone() {
    let cfg = small_ou(21);
    let a = run_rate_study(&cfg).unwrap();
    let b = run_rate_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.schema, 1);
    for w in a.results.windows(2) {
        // non-increasing as eta halves, up to CI overlap
        assert!(w[1].distance.lo <= w[0].distance.hi);
    }
    for r in &a.results {
        assert!(r.dual_lower <= r.distance.value + 1e-12);
        assert!(r.distance.value <= r.sorted_upper.unwrap() + 1e-12);
        assert!(r.exact.is_some());
    }
}

#[test]
fn study_rejects_bad_configs() {
    let mut cfg = small_ou(1);
    cfg.etas = vec![0.1, 0.2, 0.05];
    assert!(run_rate_study(&cfg).is_err());
    let mut cfg = small_ou(1);
    cfg.samples_per_eta = 500;
    assert!(run_rate_study(&cfg).is_err());
    let mut cfg = small_ou(1);
    cfg.model = SdeModel::ou(1, 0.9).unwrap();
    assert!(matches!(run_rate_study(&cfg), Err(Error::Parameter(_))));
}
