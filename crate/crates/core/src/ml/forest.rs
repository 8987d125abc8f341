use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{build_lag_features, design};
use super::tree::{grow_tree, FeatureSubset, Tree, TreeParams};
use super::OneStepRegressor;
use crate::calendar::MonthSeries;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub n_lags: usize,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_subset: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestSpec {
    pub fn new(n_lags: usize, n_estimators: usize, max_depth: usize, seed: u64) -> Self {
        ForestSpec {
            n_lags,
            n_estimators,
            max_depth,
            min_samples_leaf: 2,
            feature_subset: FeatureSubset::Sqrt,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub spec: ForestSpec,
    pub trees: Vec<Tree>,
}

impl OneStepRegressor for Forest {
    fn n_lags(&self) -> usize {
        self.spec.n_lags
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged trees. Tree `k` draws from its own ChaCha stream, so the result does
/// not depend on how rayon schedules the fits.
pub fn rf_fit(history: &MonthSeries, spec: ForestSpec) -> Result<Forest> {
    let rows = build_lag_features(history, spec.n_lags)?;
    let (x, y) = design(&rows);
    let n = y.len();
    let d = spec.n_lags + 2;
    let allowed: Vec<usize> = (0..d).collect();
    let params = TreeParams {
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        feature_subset: spec.feature_subset,
        lambda: 0.0,
    };
    let trees = (0..spec.n_estimators.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            let idx: Vec<usize> = if spec.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(&x, &y, &idx, params, &allowed, &mut rng)
        })
        .collect();
    Ok(Forest { spec, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthStamp;
    use crate::ml::{fit_tree, recursive_forecast};

    #[test]
    fn single_unbagged_tree_matches_fit_tree() {
        let v: Vec<f64> = (0..60).map(|t| 5.0 + ((t * 5) % 7) as f64).collect();
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), v).unwrap();
        let spec = ForestSpec {
            n_estimators: 1,
            bootstrap: false,
            feature_subset: FeatureSubset::All,
            ..ForestSpec::new(6, 1, 10, 3)
        };
        let f = rf_fit(&s, spec).unwrap();
        let rows = build_lag_features(&s, 6).unwrap();
        let t = fit_tree(
            &rows,
            TreeParams {
                max_depth: 10,
                min_samples_leaf: 2,
                feature_subset: FeatureSubset::All,
                lambda: 0.0,
            },
            0,
        );
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn constant_series_forecasts_constant() {
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), vec![2.5; 48]).unwrap();
        let f = rf_fit(&s, ForestSpec::new(12, 20, 10, 1)).unwrap();
        assert_eq!(recursive_forecast(&f, &s, 12).unwrap(), vec![2.5; 12]);
    }

    #[test]
    fn deterministic_for_seed() {
        let v: Vec<f64> = (0..80).map(|t| 3.0 + (t as f64 * 0.4).sin()).collect();
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), v).unwrap();
        let a = recursive_forecast(&rf_fit(&s, ForestSpec::new(6, 30, 10, 9)).unwrap(), &s, 12).unwrap();
        let b = recursive_forecast(&rf_fit(&s, ForestSpec::new(6, 30, 10, 9)).unwrap(), &s, 12).unwrap();
        assert_eq!(a, b);
    }
}
