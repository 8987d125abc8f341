//! Tree ensembles on lag features with recursive multi-step prediction.

pub mod boost;
pub mod features;
pub mod forest;
pub mod tree;

pub use boost::{gbm_fit, BoostSpec, Gbm};
pub use features::{build_lag_features, month_encoding, FeatureRow};
pub use forest::{rf_fit, Forest, ForestSpec};
pub use tree::{fit_tree, FeatureSubset, Tree, TreeParams};

use crate::calendar::MonthSeries;
use crate::error::Result;
use crate::models::check_horizon;

/// A model that predicts the next month from its lag window.
pub trait OneStepRegressor {
    fn n_lags(&self) -> usize;
    /// `x` is a feature vector laid out as in [`FeatureRow::features`].
    fn predict(&self, x: &[f64]) -> f64;
}

/// Feeds each one-step prediction back as the newest lag.
pub fn recursive_forecast<M: OneStepRegressor + ?Sized>(
    model: &M,
    history: &MonthSeries,
    h: usize,
) -> Result<Vec<f64>> {
    check_horizon(h)?;
    let l = model.n_lags();
    let v = history.values();
    if v.len() < l {
        return Err(crate::error::Error::Input(format!(
            "history of {} months is shorter than {l} lags",
            v.len()
        )));
    }
    let mut window: Vec<f64> = v[v.len() - l..].to_vec();
    let mut stamp = history.end();
    let mut out = Vec::with_capacity(h);
    let mut x = vec![0.0; l + 2];
    for _ in 0..h {
        stamp = stamp.succ();
        for (j, slot) in x.iter_mut().take(l).enumerate() {
            *slot = window[window.len() - 1 - j];
        }
        let (s, c) = month_encoding(stamp.month());
        x[l] = s;
        x[l + 1] = c;
        let yhat = model.predict(&x);
        out.push(yhat);
        window.push(yhat);
    }
    Ok(out)
}
