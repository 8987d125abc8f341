use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};
use crate::eval::metrics::rmse;
use crate::ml::{gbm_fit, recursive_forecast, rf_fit, BoostSpec, ForestSpec};
use crate::models::{
    ets_fit, naive::naive_forecast, naive::seasonal_naive_forecast, ptf_fit, sarima_select_fit,
    stl_decompose, ComponentKind, PtfMode, PtfParams, StlParams,
};

/// One fully specified model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Naive,
    SeasonalNaive,
    /// Orders chosen by AIC on the fitting window.
    SarimaAuto,
    Ets {
        trend: ComponentKind,
        seasonal: ComponentKind,
    },
    Stl {
        n_s: usize,
        n_t: Option<usize>,
    },
    Ptf(PtfParams),
    RandomForest {
        n_lags: usize,
        n_estimators: usize,
        max_depth: usize,
    },
    Gbm {
        n_lags: usize,
        n_estimators: usize,
        learning_rate: f64,
    },
}

impl ModelSpec {
    /// Fits on `history` and forecasts `h` months ahead. `seed` only affects
    /// the tree ensembles.
    pub fn forecast(&self, history: &MonthSeries, h: usize, seed: u64) -> Result<Vec<f64>> {
        self.forecast_labelled(history, h, seed).map(|(f, _)| f)
    }

    /// Like [`ModelSpec::forecast`], also returning a label of the fitted
    /// model (the chosen orders for SARIMA, the spec otherwise).
    pub fn forecast_labelled(&self, history: &MonthSeries, h: usize, seed: u64) -> Result<(Vec<f64>, String)> {
        let mut label = self.to_string();
        let out = match *self {
            ModelSpec::Naive => naive_forecast(history, h)?,
            ModelSpec::SeasonalNaive => seasonal_naive_forecast(history, h)?,
            ModelSpec::SarimaAuto => {
                let m = sarima_select_fit(history)?;
                label = format!("sarima{}", m.order);
                m.forecast(h)
            }
            ModelSpec::Ets { trend, seasonal } => ets_fit(history, trend, seasonal)?.forecast(h),
            ModelSpec::Stl { n_s, n_t } => {
                let comp = stl_decompose(history, StlParams::new(n_s, n_t))?;
                crate::models::stl_forecast(&comp, h)?
            }
            ModelSpec::Ptf(p) => ptf_fit(history, p)?.forecast(h),
            ModelSpec::RandomForest {
                n_lags,
                n_estimators,
                max_depth,
            } => {
                let f = rf_fit(history, ForestSpec::new(n_lags, n_estimators, max_depth, seed))?;
                recursive_forecast(&f, history, h)?
            }
            ModelSpec::Gbm {
                n_lags,
                n_estimators,
                learning_rate,
            } => {
                let g = gbm_fit(history, BoostSpec::new(n_lags, n_estimators, learning_rate, seed))?;
                recursive_forecast(&g, history, h)?
            }
        };
        if out.len() != h || out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("{self} produced a non-finite forecast")));
        }
        Ok((out, label))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Naive => write!(f, "naive"),
            ModelSpec::SeasonalNaive => write!(f, "seasonal_naive"),
            ModelSpec::SarimaAuto => write!(f, "sarima(aic)"),
            ModelSpec::Ets { trend, seasonal } => write!(f, "ets({trend};{seasonal})"),
            ModelSpec::Stl { n_s, n_t } => match n_t {
                Some(t) => write!(f, "stl({n_s};{t})"),
                None => write!(f, "stl({n_s};auto)"),
            },
            ModelSpec::Ptf(p) => write!(
                f,
                "ptf({};{};{};{})",
                p.changepoint_scale, p.seasonality_scale, p.mode, p.cp_range
            ),
            ModelSpec::RandomForest {
                n_lags,
                n_estimators,
                max_depth,
            } => write!(f, "rf({n_lags};{n_estimators};{max_depth})"),
            ModelSpec::Gbm {
                n_lags,
                n_estimators,
                learning_rate,
            } => write!(f, "gbm({n_lags};{n_estimators};{learning_rate})"),
        }
    }
}

/// A model family with its hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Naive,
    SeasonalNaive,
    Sarima,
    Ets,
    Stl,
    Ptf,
    RandomForest,
    Gbm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 8] = [
        ModelFamily::Naive,
        ModelFamily::SeasonalNaive,
        ModelFamily::Sarima,
        ModelFamily::Ets,
        ModelFamily::Stl,
        ModelFamily::Ptf,
        ModelFamily::RandomForest,
        ModelFamily::Gbm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Naive => "naive",
            ModelFamily::SeasonalNaive => "seasonal_naive",
            ModelFamily::Sarima => "sarima",
            ModelFamily::Ets => "ets",
            ModelFamily::Stl => "stl",
            ModelFamily::Ptf => "ptf",
            ModelFamily::RandomForest => "rf",
            ModelFamily::Gbm => "gbm",
        }
    }

    pub fn is_traditional(self) -> bool {
        !matches!(self, ModelFamily::RandomForest | ModelFamily::Gbm)
    }

    pub fn grid(self) -> Vec<ModelSpec> {
        match self {
            ModelFamily::Naive => vec![ModelSpec::Naive],
            ModelFamily::SeasonalNaive => vec![ModelSpec::SeasonalNaive],
            ModelFamily::Sarima => vec![ModelSpec::SarimaAuto],
            ModelFamily::Ets => {
                let kinds = [
                    ComponentKind::Additive,
                    ComponentKind::Multiplicative,
                    ComponentKind::None,
                ];
                let mut g = Vec::new();
                for trend in kinds {
                    for seasonal in kinds {
                        g.push(ModelSpec::Ets { trend, seasonal });
                    }
                }
                g
            }
            ModelFamily::Stl => {
                let mut g = Vec::new();
                for n_s in [7, 13, 25, 35] {
                    for n_t in [None, Some(13), Some(25), Some(51)] {
                        g.push(ModelSpec::Stl { n_s, n_t });
                    }
                }
                g
            }
            ModelFamily::Ptf => {
                let mut g = Vec::new();
                for changepoint_scale in [0.001, 0.01, 0.05, 0.1, 0.5, 1.0] {
                    for seasonality_scale in [0.01, 0.1, 1.0, 10.0, 20.0] {
                        for mode in [PtfMode::Additive, PtfMode::Multiplicative] {
                            for cp_range in [0.8, 0.9, 0.95] {
                                g.push(ModelSpec::Ptf(PtfParams {
                                    changepoint_scale,
                                    seasonality_scale,
                                    mode,
                                    cp_range,
                                }));
                            }
                        }
                    }
                }
                g
            }
            ModelFamily::RandomForest => {
                let mut g = Vec::new();
                for n_lags in [6, 12, 18] {
                    for n_estimators in [100, 200] {
                        for max_depth in [10, 15, 20] {
                            g.push(ModelSpec::RandomForest {
                                n_lags,
                                n_estimators,
                                max_depth,
                            });
                        }
                    }
                }
                g
            }
            ModelFamily::Gbm => {
                let mut g = Vec::new();
                for n_lags in [6, 12, 18] {
                    for n_estimators in [100, 200] {
                        for learning_rate in [0.05, 0.1] {
                            g.push(ModelSpec::Gbm {
                                n_lags,
                                n_estimators,
                                learning_rate,
                            });
                        }
                    }
                }
                g
            }
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match key.as_str() {
            "naive" => ModelFamily::Naive,
            "seasonal_naive" | "snaive" => ModelFamily::SeasonalNaive,
            "sarima" | "arima" => ModelFamily::Sarima,
            "ets" | "exp_smoothing" | "exponential_smoothing" => ModelFamily::Ets,
            "stl" => ModelFamily::Stl,
            "ptf" | "prophet" => ModelFamily::Ptf,
            "rf" | "random_forest" => ModelFamily::RandomForest,
            "gbm" | "xgboost" | "xgb" => ModelFamily::Gbm,
            _ => return Err(Error::Input(format!("unknown model '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub spec: ModelSpec,
    /// Fitted-model label from the refit.
    pub label: String,
    /// `None` when the grid was a singleton and validation was skipped.
    pub validation_rmse: Option<f64>,
    pub forecast: Vec<f64>,
    /// Grid points that failed during validation.
    pub failures: Vec<(ModelSpec, String)>,
}

/// Picks the grid point with the lowest validation RMSE (ties go to the
/// earlier entry), refits it on train + validation and forecasts `horizon`
/// months. Test actuals never enter this function.
pub fn grid_search(
    grid: &[ModelSpec],
    train: &MonthSeries,
    validation: &MonthSeries,
    horizon: usize,
    seed: u64,
) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Selection("empty grid".into()));
    }
    let combined = train.concat(validation)?;
    let mut failures = Vec::new();
    let (index, validation_rmse) = if grid.len() == 1 {
        (0, None)
    } else {
        let h = validation.len();
        let scores: Vec<Result<f64>> = grid
            .par_iter()
            .map(|spec| {
                let f = spec.forecast(train, h, seed)?;
                let r = rmse(validation.values(), &f);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(Error::Input("non-finite validation RMSE".into()))
                }
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.into_iter().enumerate() {
            match s {
                Ok(r) => {
                    if best.is_none_or(|(_, b)| r < b) {
                        best = Some((i, r));
                    }
                }
                Err(e) => failures.push((grid[i], e.to_string())),
            }
        }
        match best {
            Some((i, r)) => (i, Some(r)),
            None => {
                let detail: Vec<String> =
                    failures.iter().map(|(s, e)| format!("{s}: {e}")).collect();
                return Err(Error::Selection(format!(
                    "every grid point failed: {}",
                    detail.join("; ")
                )));
            }
        }
    };
    let spec = grid[index];
    let (forecast, label) = spec
        .forecast_labelled(&combined, horizon, seed)
        .map_err(|e| Error::Selection(format!("refit of {spec} failed: {e}")))?;
    Ok(Selection {
        index,
        spec,
        label,
        validation_rmse,
        forecast,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthStamp;

    #[test]
    fn grid_sizes() {
        let sizes: Vec<usize> = ModelFamily::ALL.iter().map(|f| f.grid().len()).collect();
        assert_eq!(sizes, vec![1, 1, 1, 9, 16, 180, 18, 12]);
    }

    #[test]
    fn singleton_uses_refit() {
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), (1..=48).map(f64::from).collect()).unwrap();
        let train = s.up_to(MonthStamp::ym(2002, 12)).unwrap();
        let val = s.slice_window((MonthStamp::ym(2003, 1), MonthStamp::ym(2003, 12))).unwrap();
        let sel = grid_search(&[ModelSpec::Naive], &train, &val, 3, 0).unwrap();
        assert_eq!(sel.validation_rmse, None);
        assert_eq!(sel.forecast, vec![48.0; 3]);
    }

    #[test]
    fn tie_goes_to_first() {
        // Constant series: naive and seasonal naive both score zero.
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), vec![3.0; 48]).unwrap();
        let train = s.up_to(MonthStamp::ym(2002, 12)).unwrap();
        let val = s.slice_window((MonthStamp::ym(2003, 1), MonthStamp::ym(2003, 12))).unwrap();
        let sel = grid_search(&[ModelSpec::SeasonalNaive, ModelSpec::Naive], &train, &val, 12, 0).unwrap();
        assert_eq!(sel.index, 0);
        let sel = grid_search(&[ModelSpec::Naive, ModelSpec::SeasonalNaive], &train, &val, 12, 0).unwrap();
        assert_eq!(sel.index, 0);
    }

    #[test]
    fn generating_configuration_selected() {
        // Pure seasonal pattern: seasonal naive is exact, naive is not.
        let v: Vec<f64> = (0..60).map(|i| 10.0 + (i % 12) as f64).collect();
        let s = MonthSeries::new(MonthStamp::ym(2000, 1), v).unwrap();
        let train = s.up_to(MonthStamp::ym(2002, 12)).unwrap();
        let val = s.slice_window((MonthStamp::ym(2003, 1), MonthStamp::ym(2004, 12))).unwrap();
        let sel = grid_search(&[ModelSpec::Naive, ModelSpec::SeasonalNaive], &train, &val, 12, 0).unwrap();
        assert_eq!(sel.spec, ModelSpec::SeasonalNaive);
        assert_eq!(sel.validation_rmse, Some(0.0));
    }
}
