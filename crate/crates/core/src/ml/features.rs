use std::f64::consts::PI;

use crate::calendar::{MonthSeries, MonthStamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub stamp: MonthStamp,
    /// `P_{t-1}, …, P_{t-L}`.
    pub lags: Vec<f64>,
    pub month_sin: f64,
    pub month_cos: f64,
    pub target: f64,
}

impl FeatureRow {
    /// Lags followed by the sine and cosine of the month.
    pub fn features(&self) -> Vec<f64> {
        let mut x = self.lags.clone();
        x.push(self.month_sin);
        x.push(self.month_cos);
        x
    }
}

/// `(sin(2πm/12), cos(2πm/12))` for calendar month `m`.
pub fn month_encoding(month: u32) -> (f64, f64) {
    let a = 2.0 * PI * month as f64 / 12.0;
    (a.sin(), a.cos())
}

pub fn build_lag_features(history: &MonthSeries, lags: usize) -> Result<Vec<FeatureRow>> {
    let v = history.values();
    if lags == 0 || v.len() <= lags {
        return Err(Error::Input(format!(
            "{lags} lags need more than {lags} observations, got {}",
            v.len()
        )));
    }
    Ok((lags..v.len())
        .map(|t| {
            let stamp = history.stamp_at(t);
            let (month_sin, month_cos) = month_encoding(stamp.month());
            FeatureRow {
                stamp,
                lags: (1..=lags).map(|j| v[t - j]).collect(),
                month_sin,
                month_cos,
                target: v[t],
            }
        })
        .collect())
}

/// Features and targets as parallel arrays.
pub(crate) fn design(rows: &[FeatureRow]) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        rows.iter().map(FeatureRow::features).collect(),
        rows.iter().map(|r| r.target).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_layout() {
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), (1..=13).map(f64::from).collect()).unwrap();
        let rows = build_lag_features(&s, 12).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].lags[0], 12.0);
        assert_eq!(rows[0].lags[11], 1.0);
        assert_eq!(rows[0].target, 13.0);
        assert_eq!(rows[0].stamp, MonthStamp::ym(2001, 1));
        let short = MonthSeries::new(MonthStamp::ym(2000, 1), vec![1.0; 18]).unwrap();
        assert!(build_lag_features(&short, 18).is_err());
    }

    #[test]
    fn june_encoding() {
        let (s, c) = month_encoding(6);
        assert!(s.abs() < 1e-15);
        assert_eq!(c, -1.0);
    }
}
