//! Randomized properties of the statistical and tree-based forecasters.

use cropcast::calendar::{MonthSeries, MonthStamp};
use cropcast::eval::ModelSpec;
use cropcast::ml::{build_lag_features, gbm_fit, month_encoding, recursive_forecast, rf_fit, BoostSpec, ForestSpec};
use cropcast::models::ets::ets_fit_values;
use cropcast::models::ptf::ptf_fit_values;
use cropcast::models::stl::stl_decompose_values;
use cropcast::models::{
    naive_forecast, seasonal_naive_forecast, ComponentKind, PtfMode, PtfParams, SarimaModel, SarimaOrder, StlParams,
};
use proptest::prelude::*;

/// Positive monthly path: level, trend, seasonal sine and bounded noise.
fn price_path(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        1.0f64..100.0,
        -0.004f64..0.004,
        0.0f64..0.2,
        0.0f64..6.3,
        prop::collection::vec(-0.05f64..0.05, max),
        min..max,
    )
        .prop_map(|(level, slope, amp, phase, noise, n)| {
            (0..n)
                .map(|t| {
                    let s = (2.0 * std::f64::consts::PI * t as f64 / 12.0 + phase).sin();
                    level * (1.0 + slope * t as f64 + amp * s + noise[t])
                })
                .collect()
        })
}

fn month_series(v: Vec<f64>) -> MonthSeries {
    MonthSeries::new(MonthStamp::ym(2001, 3), v).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        prop_assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_walk_sarima_is_naive(v in price_path(14, 120), h in 1usize..=24) {
        let order = SarimaOrder::new(0, 1, 0, 0, 0, 0).unwrap();
        let m = SarimaModel::fit_values(&v, order).unwrap();
        let naive = naive_forecast(&month_series(v), h).unwrap();
        prop_assert_eq!(m.forecast(h), naive);
    }

    #[test]
    fn sarima_fit_is_deterministic(v in price_path(60, 96), pick in any::<prop::sample::Index>()) {
        let order = *pick.get(&SarimaOrder::grid());
        let a = SarimaModel::fit_values(&v, order).map(|m| m.forecast(12));
        let b = SarimaModel::fit_values(&v, order).map(|m| m.forecast(12));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.iter().all(|x| x.is_finite()));
                prop_assert_eq!(a, b);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn naive_family_outputs_h_positive_values(v in price_path(24, 120), h in 1usize..=36) {
        let s = month_series(v);
        for f in [naive_forecast(&s, h).unwrap(), seasonal_naive_forecast(&s, h).unwrap()] {
            prop_assert_eq!(f.len(), h);
            prop_assert!(f.iter().all(|x| x.is_finite() && *x > 0.0));
        }
    }

    #[test]
    fn ets_additive_shift_equivariance(
        v in price_path(36, 96),
        c in -50.0f64..50.0,
        kinds in prop::sample::select(vec![
            (ComponentKind::None, ComponentKind::Additive),
            (ComponentKind::Additive, ComponentKind::None),
            (ComponentKind::Additive, ComponentKind::Additive),
        ]),
    ) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = ets_fit_values(&v, kinds.0, kinds.1).unwrap().forecast(12);
        let b = ets_fit_values(&shifted, kinds.0, kinds.1).unwrap().forecast(12);
        let expect: Vec<f64> = a.iter().map(|x| x + c).collect();
        let scale = v.iter().fold(c.abs(), |m, x| m.max(x.abs()));
        close(&b, &expect, 1e-6 * scale)?;
    }

    #[test]
    fn stl_components_sum_to_input(
        v in price_path(24, 150),
        n_s in prop::sample::select(vec![7usize, 9, 11, 13, 15]),
        robust in any::<bool>(),
    ) {
        let params = StlParams { robust, ..StlParams::new(n_s, None) };
        let comp = stl_decompose_values(&v, params).unwrap();
        for t in 0..v.len() {
            let sum = comp.trend[t] + comp.seasonal[t] + comp.residual[t];
            prop_assert!((sum - v[t]).abs() <= 1e-8, "t={t}: {sum} vs {}", v[t]);
        }
    }

    #[test]
    fn lag_features_recover_the_tail(v in price_path(8, 80), lags in prop::sample::select(vec![1usize, 6, 12, 18])) {
        prop_assume!(v.len() > lags);
        let s = month_series(v.clone());
        let rows = build_lag_features(&s, lags).unwrap();
        let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
        prop_assert_eq!(&targets[..], &v[lags..]);
        for (i, r) in rows.iter().enumerate() {
            prop_assert_eq!(r.lags[0], v[lags + i - 1]);
            prop_assert_eq!(r.stamp, s.stamp_at(lags + i));
        }
    }

    #[test]
    fn month_encoding_on_unit_circle(m in 1u32..=12) {
        let (s, c) = month_encoding(m);
        prop_assert!((s * s + c * c - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    // Each case fits a penalized regression by coordinate descent twice.
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ptf_additive_linear_equivariance(
        v in price_path(36, 72),
        a in -20.0f64..20.0,
        b in -0.5f64..0.5,
        tau in prop::sample::select(vec![0.001, 0.05, 0.5]),
        sigma in prop::sample::select(vec![0.01, 1.0, 10.0]),
        cp_range in prop::sample::select(vec![0.8, 0.9, 0.95]),
    ) {
        let params = PtfParams { changepoint_scale: tau, seasonality_scale: sigma, mode: PtfMode::Additive, cp_range };
        let n = v.len();
        let lifted: Vec<f64> = v.iter().enumerate().map(|(t, x)| x + a + b * t as f64).collect();
        let f0 = ptf_fit_values(&v, params).unwrap().forecast(12);
        let f1 = ptf_fit_values(&lifted, params).unwrap().forecast(12);
        let expect: Vec<f64> = f0.iter().enumerate().map(|(i, x)| x + a + b * (n + i) as f64).collect();
        let scale = lifted.iter().chain(&v).fold(1.0f64, |m, x| m.max(x.abs()));
        close(&f1, &expect, 1e-6 * scale)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tree_models_are_deterministic_and_bounded(v in price_path(40, 90), seed in any::<u64>()) {
        let s = month_series(v.clone());
        let spec = ForestSpec::new(6, 10, 6, seed);
        let f1 = rf_fit(&s, spec).unwrap();
        let f2 = rf_fit(&s, spec).unwrap();
        let p1 = recursive_forecast(&f1, &s, 12).unwrap();
        prop_assert_eq!(&p1, &recursive_forecast(&f2, &s, 12).unwrap());
        let lo = v[6..].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v[6..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p1.iter().all(|x| *x >= lo - 1e-9 && *x <= hi + 1e-9));

        let bspec = BoostSpec::new(6, 20, 0.1, seed);
        let g1 = gbm_fit(&s, bspec).unwrap();
        let g2 = gbm_fit(&s, bspec).unwrap();
        prop_assert_eq!(recursive_forecast(&g1, &s, 12).unwrap(), recursive_forecast(&g2, &s, 12).unwrap());
        prop_assert_eq!(g1.stage_sse, g2.stage_sse);
    }

    #[test]
    fn full_sample_boosting_sse_never_rises(v in price_path(30, 90), seed in any::<u64>(), eta in prop::sample::select(vec![0.05, 0.1, 0.5, 1.0])) {
        let spec = BoostSpec { subsample: 1.0, colsample: 1.0, ..BoostSpec::new(6, 15, eta, seed) };
        let g = gbm_fit(&month_series(v), spec).unwrap();
        for w in g.stage_sse.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}

proptest! {
    // Grid families are expensive per call; the determinism check covers one
    // randomly drawn spec per case.
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_grid_spec_is_deterministic(
        v in price_path(48, 72),
        pick in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let grid: Vec<ModelSpec> = cropcast::eval::ModelFamily::ALL
            .iter()
            .filter(|f| f.name() != "sarima")
            .flat_map(|f| f.grid())
            .collect();
        let spec = pick.get(&grid);
        let s = month_series(v);
        let a = spec.forecast(&s, 12, seed);
        let b = spec.forecast(&s, 12, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.len(), 12);
                prop_assert!(a.iter().all(|x| x.is_finite()));
                prop_assert_eq!(a, b);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}
