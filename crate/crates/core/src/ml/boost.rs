use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{build_lag_features, design};
use super::tree::{grow_tree, FeatureSubset, Tree, TreeParams};
use super::OneStepRegressor;
use crate::calendar::MonthSeries;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostSpec {
    pub n_lags: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Row fraction per stage, drawn without replacement.
    pub subsample: f64,
    /// Column fraction per tree.
    pub colsample: f64,
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl BoostSpec {
    pub fn new(n_lags: usize, n_estimators: usize, learning_rate: f64, seed: u64) -> Self {
        BoostSpec {
            n_lags,
            n_estimators,
            learning_rate,
            max_depth: 6,
            subsample: 0.8,
            colsample: 0.8,
            lambda: 1.0,
            min_samples_leaf: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gbm {
    pub spec: BoostSpec,
    pub base: f64,
    pub trees: Vec<Tree>,
    /// Training SSE before any tree and after each stage.
    pub stage_sse: Vec<f64>,
}

impl OneStepRegressor for Gbm {
    fn n_lags(&self) -> usize {
        self.spec.n_lags
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.base
            + self.spec.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

fn fraction(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).clamp(1, n)
}

/// Stagewise squared-error boosting from the training mean.
pub fn gbm_fit(history: &MonthSeries, spec: BoostSpec) -> Result<Gbm> {
    let rows = build_lag_features(history, spec.n_lags)?;
    let (x, y) = design(&rows);
    let n = y.len();
    let d = spec.n_lags + 2;
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let sse = |f: &[f64]| f.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let mut stage_sse = vec![sse(&fitted)];
    let params = TreeParams {
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        feature_subset: FeatureSubset::All,
        lambda: spec.lambda,
    };
    let mut trees = Vec::with_capacity(spec.n_estimators);
    for k in 0..spec.n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64);
        let mut idx: Vec<usize> = if spec.subsample < 1.0 {
            sample(&mut rng, n, fraction(n, spec.subsample)).into_vec()
        } else {
            (0..n).collect()
        };
        idx.sort_unstable();
        let mut cols: Vec<usize> = if spec.colsample < 1.0 {
            sample(&mut rng, d, fraction(d, spec.colsample)).into_vec()
        } else {
            (0..d).collect()
        };
        cols.sort_unstable();
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let tree = grow_tree(&x, &resid, &idx, params, &cols, &mut rng);
        for (f, xi) in fitted.iter_mut().zip(&x) {
            *f += spec.learning_rate * tree.predict(xi);
        }
        stage_sse.push(sse(&fitted));
        trees.push(tree);
    }
    Ok(Gbm {
        spec,
        base,
        trees,
        stage_sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthStamp;
    use crate::ml::recursive_forecast;

    fn series() -> MonthSeries {
        let v: Vec<f64> = (0..90)
            .map(|t| 4.0 + (t as f64 * 0.52).sin() + 0.01 * t as f64)
            .collect();
        MonthSeries::new(MonthStamp::ym(2000, 1), v).unwrap()
    }

    fn full(spec: BoostSpec) -> BoostSpec {
        BoostSpec {
            subsample: 1.0,
            colsample: 1.0,
            ..spec
        }
    }

    #[test]
    fn empty_ensemble_is_training_mean() {
        let s = series();
        let g = gbm_fit(&s, BoostSpec::new(6, 0, 0.1, 0)).unwrap();
        let mean = s.values()[6..].iter().sum::<f64>() / (s.len() - 6) as f64;
        assert_eq!(recursive_forecast(&g, &s, 3).unwrap(), vec![mean; 3]);
    }

    #[test]
    fn single_stage_is_mean_plus_tree() {
        let s = series();
        let spec = BoostSpec {
            lambda: 0.0,
            ..full(BoostSpec::new(6, 1, 1.0, 0))
        };
        let g = gbm_fit(&s, spec).unwrap();
        let rows = build_lag_features(&s, 6).unwrap();
        let (x, y) = design(&rows);
        let resid: Vec<f64> = y.iter().map(|v| v - g.base).collect();
        let t = crate::ml::tree::fit_tree_xy(
            &x,
            &resid,
            TreeParams {
                max_depth: 6,
                min_samples_leaf: 1,
                feature_subset: FeatureSubset::All,
                lambda: 0.0,
            },
            0,
        );
        for xi in &x {
            assert_eq!(g.predict(xi), g.base + t.predict(xi));
        }
    }

    #[test]
    fn training_sse_non_increasing() {
        let g = gbm_fit(&series(), full(BoostSpec::new(12, 60, 0.05, 4))).unwrap();
        for w in g.stage_sse.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
        }
    }
}
