//! Randomized properties of the calendar, series and ingestion layers.

mod common;

use cropcast::calendar::{month_index_in_my, Commodity, MonthSeries, MonthStamp};
use cropcast::ingest::{
    forecast_weights, olympic_mean, read_normalized, write_normalized, Dataset, MyaKey, MyaKind,
};
use proptest::prelude::*;

fn commodity() -> impl Strategy<Value = Commodity> {
    prop::sample::select(Commodity::ALL.to_vec())
}

fn series(min: usize, max: usize) -> impl Strategy<Value = MonthSeries> {
    (1950i32..2050, 1u8..=12, prop::collection::vec(0.01f64..1e4, min..max))
        .prop_map(|(y, m, v)| MonthSeries::new(MonthStamp::ym(y, m), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn month_index_is_a_bijection(c in commodity(), year in 1900i32..2200) {
        let cal = c.calendar();
        let mut seen: Vec<u32> = cal
            .marketing_year(year)
            .months()
            .map(|m| month_index_in_my(&cal, m))
            .collect();
        prop_assert_eq!(seen[0], 1);
        seen.sort_unstable();
        prop_assert_eq!(seen, (1..=12).collect::<Vec<u32>>());
    }

    #[test]
    fn slice_window_is_idempotent(s in series(1, 150), a in 0usize..150, b in 0usize..150) {
        let n = s.len();
        let (lo, hi) = (a.min(b) % n, a.max(b) % n);
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let w = (s.stamp_at(lo), s.stamp_at(hi));
        let once = s.slice_window(w).unwrap();
        let twice = once.slice_window(w).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.values(), &s.values()[lo..=hi]);
    }

    #[test]
    fn consecutive_windows_reconstruct(s in series(2, 150), cut in 0usize..150) {
        let k = cut % (s.len() - 1);
        let left = s.slice_window((s.start(), s.stamp_at(k))).unwrap();
        let right = s.slice_window((s.stamp_at(k + 1), s.end())).unwrap();
        prop_assert_eq!(left.concat(&right).unwrap(), s);
    }

    #[test]
    fn olympic_mean_of_equal_values_is_the_plain_mean(x in -1e6f64..1e6, n in 3usize..20) {
        let v = vec![x; n];
        let plain = v.iter().sum::<f64>() / n as f64;
        prop_assert!((olympic_mean(&v) - plain).abs() <= n as f64 * f64::EPSILON * x.abs());
    }

    #[test]
    fn forecast_weights_ignore_uniform_rescaling(
        c in commodity(),
        raw in prop::collection::vec(0.1f64..30.0, 84),
        scale in 1e-3f64..1e3,
    ) {
        let cal = c.calendar();
        let target = cal.marketing_year(2010);
        let mut a = Dataset::default();
        let mut b = Dataset::default();
        for (i, m) in common::stamps(cal.my_start(2003), cal.my_start(2009).add_months(11)).enumerate() {
            a.marketing_pct_mut(c).insert(m, raw[i]);
            b.marketing_pct_mut(c).insert(m, raw[i] * scale);
        }
        let wa = forecast_weights(&a, &cal, &target).unwrap();
        let wb = forecast_weights(&b, &cal, &target).unwrap();
        for (x, y) in wa.w.iter().zip(wb.w.iter()) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
        prop_assert!((wa.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_round_trip(
        c in commodity(),
        start in (1980i32..2020, 1u8..=12),
        prices in prop::collection::vec(1e-3f64..1e5, 1..40),
        pct in prop::collection::vec(0.0f64..100.0, 0..40),
        mya in prop::option::of(1e-3f64..1e3),
    ) {
        let mut ds = Dataset::default();
        let s0 = MonthStamp::ym(start.0, start.1);
        for (i, p) in prices.iter().enumerate() {
            ds.prices_mut(c).insert(s0.add_months(i as i64), *p);
        }
        for (i, p) in pct.iter().enumerate() {
            ds.marketing_pct_mut(c).insert(s0.add_months(i as i64), *p);
        }
        if let Some(v) = mya {
            let key = MyaKey { commodity: c, marketing_year: start.0, kind: MyaKind::Actual, vintage: None };
            ds.published_mut().insert(key, v).unwrap();
        }
        let mut buf = Vec::new();
        write_normalized(&ds, &mut buf).unwrap();
        let back = read_normalized(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }
}
