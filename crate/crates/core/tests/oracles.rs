//! Checks against values computed independently inside this file.

mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use cropcast::calendar::{Commodity, MarketingYear, MonthStamp};
use cropcast::error::Error;
use cropcast::eval::{dm_test, make_splits, two_step_average};
use cropcast::external::{replicate_published, ContractMapping};
use cropcast::ingest::Dataset;
use cropcast::synth::{
    calibrate, evaluate_spec, gram_matrix, initial_spec, jittered_cholesky, sample_gp, sample_statistics,
    CalibrationTargets, KernelSpec, Range,
};
use nalgebra::SymmetricEigen;

fn spec(sigma_p2: f64, sigma_r2: f64, sigma_n2: f64, mu: f64) -> KernelSpec {
    KernelSpec {
        sigma_p2,
        ell_p: 1.0,
        sigma_r2,
        ell_r: 36.0,
        sigma_n2,
        mu,
        period: 12.0,
    }
}

/// Periodic + RBF + white-noise covariance written out from the kernel
/// definitions.
fn kernel(s: &KernelSpec, t: f64, u: f64) -> f64 {
    let d = (t - u).abs();
    let per = s.sigma_p2 * (-2.0 * (std::f64::consts::PI * d / s.period).sin().powi(2) / s.ell_p.powi(2)).exp();
    let rbf = s.sigma_r2 * (-(d * d) / (2.0 * s.ell_r * s.ell_r)).exp();
    per + rbf + if d == 0.0 { s.sigma_n2 } else { 0.0 }
}

#[test]
fn gp_two_point_covariance_matches_kernel() {
    // Lag 3 puts the periodic term at exp(-2): a genuinely mixed covariance.
    let s = KernelSpec { ell_r: 4.0, ..spec(1.0, 2.0, 0.3, 100.0) };
    let n = 10_000;
    let draws: Vec<Vec<f64>> = (0..n as u64)
        .map(|seed| sample_gp(&s, 4, seed).unwrap().values.values().to_vec())
        .collect();
    let mean = |i: usize| draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
    let (m0, m3) = (mean(0), mean(3));
    let cov = |i: usize, mi: f64, j: usize, mj: f64| {
        draws.iter().map(|d| (d[i] - mi) * (d[j] - mj)).sum::<f64>() / (n - 1) as f64
    };
    let expect = [
        (cov(0, m0, 0, m0), kernel(&s, 0.0, 0.0)),
        (cov(3, m3, 3, m3), kernel(&s, 3.0, 3.0)),
        (cov(0, m0, 3, m3), kernel(&s, 0.0, 3.0)),
    ];
    for (got, want) in expect {
        assert!((got - want).abs() <= 0.05 * want, "{got} vs {want}");
    }
}

#[test]
fn gp_single_point_mean_within_three_standard_errors() {
    let s = spec(0.5, 1.5, 0.2, 20.0);
    let n = 10_000;
    let x: Vec<f64> = (0..n as u64).map(|seed| sample_gp(&s, 1, seed).unwrap().values.values()[0]).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let se = (kernel(&s, 0.0, 0.0) / n as f64).sqrt();
    assert!((mean - s.mu).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn gram_matrix_is_psd_and_matches_kernel() {
    for s in [initial_spec(4.0), initial_spec(65.0), spec(1.0, 0.0, 0.0, 10.0), spec(0.0, 1.0, 0.0, 10.0)] {
        let k = gram_matrix(&s, 156);
        for i in (0..156).step_by(13) {
            for j in (0..156).step_by(7) {
                assert!((k[(i, j)] - kernel(&s, i as f64, j as f64)).abs() <= 1e-12 * k[(0, 0)]);
            }
        }
        let eig = SymmetricEigen::new(k.clone()).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9 * k.trace(), "min eigenvalue {min}");

        let (l, jitter) = jittered_cholesky(&k).unwrap();
        let floor = SymmetricEigen::new(&l * l.transpose()).eigenvalues.min();
        assert!(floor > 0.0 && jitter >= 1e-8 * k.trace() / 156.0);
    }
}

#[test]
fn removing_white_noise_raises_autocorrelation() {
    let targets = CalibrationTargets::default();
    let noisy = initial_spec(4.0);
    let clean = KernelSpec { sigma_n2: 0.0, ..noisy };
    let ac = |s: &KernelSpec| -> Vec<f64> {
        sample_statistics(s, targets.length, 200, 7)
            .unwrap()
            .into_iter()
            .map(|x| x.map_or(f64::NAN, |x| x.autocorr))
            .collect()
    };
    // Same random numbers on both sides, so the comparison is paired.
    let (a, b) = (ac(&clean), ac(&noisy));
    let pairs: Vec<(f64, f64)> = a.into_iter().zip(b).filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    assert!(pairs.len() > 150);
    let higher = pairs.iter().filter(|(x, y)| x > y).count();
    assert!(higher as f64 >= 0.95 * pairs.len() as f64, "{higher}/{}", pairs.len());
}

#[test]
fn impossible_targets_report_calibration_error() {
    let targets = CalibrationTargets {
        autocorr: Range::new(0.995, 0.999),
        volatility: Range::new(2.0, 3.0),
        draws: 40,
        rounds: 2,
        ..CalibrationTargets::default()
    };
    match calibrate(4.0, &targets, 1) {
        Err(Error::Calibration(msg)) => assert!(msg.contains("nearest miss")),
        other => panic!("expected a calibration error, got {other:?}"),
    }
}

#[test]
fn calibrated_spec_resimulates_in_range() {
    let targets = CalibrationTargets::default();
    let fit = calibrate(4.0, &targets, 11).unwrap();
    let again = evaluate_spec(&fit.spec, &targets, 11).unwrap();
    assert_eq!(again, fit);
    let fresh = evaluate_spec(&fit.spec, &CalibrationTargets { draws: 400, ..targets }, 12_345).unwrap();
    assert!(fresh.satisfies(&targets), "{fresh:?}");
}

#[test]
fn dm_matches_hand_computed_newey_west() {
    let a = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 2.0, 3.0];
    let b = [2.0, 1.0, 1.0, 2.0, 3.0, 1.0, 2.0, 1.0];
    // d = [-1, 2, 1, 3, 1, 5, 0, 2], mean 13/8
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    assert_eq!(m, 13.0 / 8.0);
    let g = |j: usize| (j..d.len()).map(|t| (d[t] - m) * (d[t - j] - m)).sum::<f64>() / n;
    for bw in [0usize, 1, 2, 3] {
        let lrv = g(0) + (1..=bw).map(|j| 2.0 * (1.0 - j as f64 / (bw as f64 + 1.0)) * g(j)).sum::<f64>();
        let stat = m / (lrv / n).sqrt();
        let r = dm_test(&a, &b, bw).unwrap();
        assert!((r.statistic - stat).abs() <= 1e-12 * stat.abs(), "bw {bw}: {} vs {stat}", r.statistic);
        let p = statrs::function::erf::erfc(stat.abs() / 2f64.sqrt());
        assert!((r.p_value - p).abs() <= 1e-12);
    }
}

#[test]
fn two_step_average_differs_from_pooled_mean() {
    let groups: BTreeMap<&str, Vec<f64>> = [("a", vec![1.0]), ("b", vec![3.0, 3.0, 3.0])].into_iter().collect();
    let pooled = groups.values().flatten().sum::<f64>() / 4.0;
    assert_eq!(pooled, 2.5);
    assert_eq!(two_step_average(&groups).unwrap(), 2.0);
}

#[test]
fn split_sizes_over_four_commodities() {
    let all: Vec<_> = Commodity::ALL.iter().map(|c| make_splits(&c.calendar())).collect();
    assert!(all.iter().all(|s| s.len() == 16));
    for s in 0..16 {
        let train: usize = all.iter().map(|v| v[s].train.months()).sum();
        let val: usize = all.iter().map(|v| v[s].validation.months()).sum();
        let test: usize = all.iter().map(|v| v[s].test.months()).sum();
        assert_eq!((train, val, test), (480 + 48 * s, 96, 48));
    }
}

// Composite MYA replication against an independent re-derivation.

fn listed(c: Commodity) -> &'static [u32] {
    match c {
        Commodity::Corn | Commodity::Wheat => &[3, 5, 7, 9, 12],
        Commodity::Soybeans => &[1, 3, 5, 7, 8, 9, 11],
        Commodity::Cotton => &[3, 5, 7, 10, 12],
    }
}

fn history_mean(c: Commodity, mut v: Vec<f64>) -> f64 {
    if c == Commodity::Cotton {
        v.sort_by(f64::total_cmp);
        v = v[1..v.len() - 1].to_vec();
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn oracle_mya(ds: &Dataset, c: Commodity, my: i32, vintage: NaiveDate) -> f64 {
    let years = if c == Commodity::Cotton { 7 } else { 5 };
    let start = c.calendar().my_start(my);
    let mut raw = [0.0; 12];
    let mut price = [0.0; 12];
    for k in 0..12 {
        let past = |y: i32| start.add_months(12 * y as i64 + k as i64);
        raw[k] = history_mean(c, (1..=years).map(|y| ds.marketing_pct(c, past(-y)).unwrap()).collect());
        let m = start.add_months(k as i64);
        let next = m.add_months(1);
        let published = NaiveDate::from_ymd_opt(next.year(), next.month(), 1).unwrap() <= vintage;
        price[k] = if published {
            ds.price(c, m).unwrap()
        } else {
            let basis = history_mean(c, (1..=years).map(|y| ds.basis(c, past(-y)).unwrap()).collect());
            let contract = match listed(c).iter().find(|x| **x > m.month()) {
                Some(x) => MonthStamp::ym(m.year(), *x as u8),
                None => MonthStamp::ym(m.year() + 1, listed(c)[0] as u8),
            };
            let book = &ds.futures(c).unwrap()[&contract];
            let settle = book.iter().filter(|(d, _)| **d <= vintage).next_back().unwrap().1;
            settle + basis
        };
    }
    let total: f64 = raw.iter().sum();
    (0..12).map(|k| price[k] * raw[k] / total).sum()
}

#[test]
fn composite_mya_replicates_independent_derivation() {
    let mut ds = common::fixture_dataset();
    let mut count = 0;
    for c in Commodity::ALL {
        for my in 2017..=2024 {
            let cal = c.calendar();
            let start = cal.my_start(my);
            let mid = start.add_months(5);
            let vintages = [
                common::pre_season(c, my, 2, 10),
                common::pre_season(c, my, 1, 10),
                NaiveDate::from_ymd_opt(mid.year(), mid.month(), 12).unwrap(),
            ];
            for v in vintages {
                let digits = if c == Commodity::Cotton { 10.0 } else { 100.0 };
                let published = (oracle_mya(&ds, c, my, v) * digits).round() / digits;
                common::publish(&mut ds, c, my, Some(v), published);
                count += 1;
            }
        }
    }
    let report = replicate_published(&ds, &ContractMapping::default(), 2017..=2024);
    assert_eq!(report.cells.len(), count);
    let bad: Vec<_> = report.mismatches().collect();
    assert!(bad.is_empty(), "{bad:#?}");
    assert_eq!(report.match_rate(), 1.0);

    // A published value off by more than the tolerance is itemized.
    let my = MarketingYear::new(Commodity::Corn, 2016);
    let v = common::pre_season(Commodity::Corn, 2016, 1, 10);
    let off = oracle_mya(&ds, my.commodity, 2016, v) + 0.02;
    common::publish(&mut ds, my.commodity, my.start_year, Some(v), off);
    let report = replicate_published(&ds, &ContractMapping::default(), 2016..=2024);
    let bad: Vec<_> = report.mismatches().collect();
    assert_eq!(bad.len(), 1);
    assert_eq!((bad[0].marketing_year, bad[0].vintage), (2016, v));
}
