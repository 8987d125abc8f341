use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MarketingWeights;

/// Point-forecast accuracy for one scored pair of sequences.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricBlock {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
    /// Percent.
    pub smape: f64,
}

impl MetricBlock {
    /// Equal-weight mean of several blocks. Empty input gives `None`.
    pub fn mean<'a, I: IntoIterator<Item = &'a MetricBlock>>(blocks: I) -> Option<MetricBlock> {
        let mut acc = MetricBlock::default();
        let mut n = 0usize;
        for b in blocks {
            acc.mae += b.mae;
            acc.rmse += b.rmse;
            acc.mape += b.mape;
            acc.smape += b.smape;
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let k = n as f64;
        Some(MetricBlock {
            mae: acc.mae / k,
            rmse: acc.rmse / k,
            mape: acc.mape / k,
            smape: acc.smape / k,
        })
    }
}

pub fn score_monthly(actual: &[f64], forecast: &[f64]) -> Result<MetricBlock> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::Metric(format!(
            "cannot score {} forecasts against {} actuals",
            forecast.len(),
            actual.len()
        )));
    }
    if let Some(i) = actual.iter().position(|y| *y == 0.0) {
        return Err(Error::Metric(format!("actual value {i} is zero; MAPE undefined")));
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq, mut pct, mut spct) = (0.0, 0.0, 0.0, 0.0);
    for (y, f) in actual.iter().zip(forecast) {
        let e = (y - f).abs();
        abs += e;
        sq += e * e;
        pct += e / y.abs();
        let denom = (y.abs() + f.abs()) / 2.0;
        if denom > 0.0 {
            spct += e / denom;
        }
    }
    Ok(MetricBlock {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape: 100.0 * pct / n,
        smape: 100.0 * spct / n,
    })
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let sq: f64 = actual.iter().zip(forecast).map(|(y, f)| (y - f).powi(2)).sum();
    (sq / n).sqrt()
}

/// Weighted MYA of a 12-month forecast in marketing order.
pub fn aggregate_mya(forecast: &[f64], weights: &MarketingWeights) -> f64 {
    forecast.iter().zip(weights.w.iter()).map(|(p, w)| p * w).sum()
}

/// Single-point MYA score; RMSE equals MAE.
pub fn score_mya(actual: f64, forecast: f64) -> MetricBlock {
    let e = (actual - forecast).abs();
    let denom = (actual.abs() + forecast.abs()) / 2.0;
    MetricBlock {
        mae: e,
        rmse: e,
        mape: if actual != 0.0 { 100.0 * e / actual.abs() } else { f64::NAN },
        smape: if denom > 0.0 { 100.0 * e / denom } else { 0.0 },
    }
}

/// Averages errors within each group first, then averages the group means.
pub fn two_step_average<K: Ord + std::fmt::Debug>(groups: &BTreeMap<K, Vec<f64>>) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Coverage("no groups to average".into()));
    }
    let mut total = 0.0;
    for (k, v) in groups {
        if v.is_empty() {
            return Err(Error::Coverage(format!("group {k:?} has no matched years")));
        }
        total += v.iter().sum::<f64>() / v.len() as f64;
    }
    Ok(total / groups.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_example() {
        let m = score_monthly(&[2.0, 4.0], &[1.0, 6.0]).unwrap();
        assert_relative_eq!(m.mae, 1.5);
        assert_relative_eq!(m.rmse, 2.5f64.sqrt());
        assert_relative_eq!(m.mape, 50.0);
        // |2−1|/1.5 + |4−6|/5
        assert_relative_eq!(m.smape, 50.0 * (1.0 / 1.5 + 2.0 / 5.0));
    }

    #[test]
    fn zero_actual_rejected() {
        assert!(matches!(score_monthly(&[0.0, 1.0], &[1.0, 1.0]), Err(Error::Metric(_))));
    }

    #[test]
    fn mya_point() {
        let m = score_mya(4.0, 4.4);
        assert_relative_eq!(m.mae, 0.4, epsilon = 1e-12);
        assert_relative_eq!(m.mape, 10.0, epsilon = 1e-9);
        assert_eq!(m.mae, m.rmse);
    }

    #[test]
    fn two_step() {
        let mut g = BTreeMap::new();
        g.insert("a", vec![0.0, 2.0]);
        g.insert("b", vec![3.0]);
        assert_relative_eq!(two_step_average(&g).unwrap(), 2.0);
        g.insert("c", vec![]);
        assert!(two_step_average(&g).is_err());
    }
}
