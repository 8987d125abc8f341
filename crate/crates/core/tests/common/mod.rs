#![allow(dead_code)]

use std::f64::consts::PI;

use chrono::NaiveDate;
use cropcast::calendar::{Commodity, MonthStamp};
use cropcast::ingest::{Dataset, MyaKey, MyaKind};

pub const BASE: [(Commodity, f64); 4] = [
    (Commodity::Corn, 4.0),
    (Commodity::Soybeans, 10.0),
    (Commodity::Wheat, 5.5),
    (Commodity::Cotton, 65.0),
];

/// Deterministic pseudo-noise in [-0.5, 0.5).
pub fn jitter(i: u64) -> f64 {
    let x = i
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
}

pub fn stamps(first: MonthStamp, last: MonthStamp) -> impl Iterator<Item = MonthStamp> {
    let n = first.months_until(last);
    (0..=n).map(move |k| first.add_months(k))
}

/// Complete monthly prices, marketing percentages and basis from 1990-01
/// through 2025-08, plus a futures book with weekly settlements. No published
/// values are included.
pub fn fixture_dataset() -> Dataset {
    let mut ds = Dataset::default();
    for (ci, (c, base)) in BASE.into_iter().enumerate() {
        let start = c.calendar().my_start_month();
        for s in stamps(MonthStamp::ym(1990, 1), MonthStamp::ym(2025, 8)) {
            let t = (s.year() - 1990) as f64 * 12.0 + s.month() as f64;
            let i = (ci as u64) << 32 | t as u64;
            let p = base
                * (1.0
                    + 0.08 * (2.0 * PI * s.month() as f64 / 12.0).sin()
                    + 0.2 * (2.0 * PI * t / 70.0).sin()
                    + 0.02 * jitter(i));
            ds.prices_mut(c).insert(s, p);
            let k = (s.month() + 12 - start) % 12;
            let w = 12.0 - k as f64 * 0.6 + 0.3 * (2.0 * PI * k as f64 / 12.0 + s.year() as f64).sin();
            ds.marketing_pct_mut(c).insert(s, w * 100.0 / 104.4);
            ds.basis_mut(c).insert(s, -0.05 * base + 0.01 * base * jitter(i ^ 0xabc));
        }
        // Every contract month in range settles on the 1st, 8th, 15th and 22nd.
        for contract in stamps(MonthStamp::ym(1995, 1), MonthStamp::ym(2027, 12)) {
            let book = ds.futures_mut(c).entry(contract).or_default();
            for back in 1..=18 {
                let m = contract.add_months(-back);
                for day in [1, 8, 15, 22] {
                    let d = NaiveDate::from_ymd_opt(m.year(), m.month(), day).unwrap();
                    let id = (ci as u64) << 40 | (contract.year() as u64) << 20 | (contract.month() as u64) << 12 | (back as u64) << 5 | day as u64;
                    book.insert(d, base * (1.05 + 0.1 * jitter(id)));
                }
            }
        }
    }
    ds
}

pub fn publish(ds: &mut Dataset, c: Commodity, my: i32, vintage: Option<NaiveDate>, value: f64) {
    let kind = if vintage.is_some() { MyaKind::Forecast } else { MyaKind::Actual };
    ds.published_mut()
        .insert(
            MyaKey {
                commodity: c,
                marketing_year: my,
                kind,
                vintage,
            },
            value,
        )
        .unwrap();
}

/// Day `day` of the month `back` months before the marketing-year start.
pub fn pre_season(c: Commodity, my: i32, back: i64, day: u32) -> NaiveDate {
    let m = c.calendar().my_start(my).add_months(-back);
    NaiveDate::from_ymd_opt(m.year(), m.month(), day).unwrap()
}
