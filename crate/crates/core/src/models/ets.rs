//! Holt-Winters exponential smoothing with additive, multiplicative or absent
//! trend and seasonal components.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};

use super::check_horizon;
use super::optim::{minimize, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    None,
    Additive,
    Multiplicative,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 3] = [
        ComponentKind::Additive,
        ComponentKind::Multiplicative,
        ComponentKind::None,
    ];

    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            ComponentKind::None => a,
            ComponentKind::Additive => a + b,
            ComponentKind::Multiplicative => a * b,
        }
    }

    fn remove(self, a: f64, b: f64) -> f64 {
        match self {
            ComponentKind::None => a,
            ComponentKind::Additive => a - b,
            ComponentKind::Multiplicative => a / b,
        }
    }

    fn neutral(self) -> f64 {
        match self {
            ComponentKind::Multiplicative => 1.0,
            _ => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ComponentKind::None => "none",
            ComponentKind::Additive => "add",
            ComponentKind::Multiplicative => "mul",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ComponentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ComponentKind::None),
            "add" | "additive" => Ok(ComponentKind::Additive),
            "mul" | "multiplicative" => Ok(ComponentKind::Multiplicative),
            other => Err(Error::Config(format!("unknown ETS component '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsState {
    pub trend_type: ComponentKind,
    pub seasonal_type: ComponentKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub level: f64,
    /// Additive slope or multiplicative growth ratio.
    pub trend: f64,
    /// The twelve most recent seasonal estimates, oldest first.
    pub seasonals: [f64; 12],
    /// Level after each observation.
    pub levels: Vec<f64>,
    /// In-sample sum of squared one-step errors.
    pub sse: f64,
    /// Constant removed before fitting additive models and added back on output.
    pub offset: f64,
}

impl EtsState {
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        (1..=h)
            .map(|k| {
                let base = match self.trend_type {
                    ComponentKind::None => self.level,
                    ComponentKind::Additive => self.level + k as f64 * self.trend,
                    ComponentKind::Multiplicative => self.level * self.trend.powi(k as i32),
                };
                let s = self.seasonals[(k - 1) % 12];
                self.seasonal_type.combine(base, s) + self.offset
            })
            .collect()
    }
}

struct Init {
    level: f64,
    trend: f64,
    season: [f64; 12],
}

fn ols_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        sxy += dt * (v - ym);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - slope * tm, slope)
}

fn initialize(y: &[f64], trend: ComponentKind, seasonal: ComponentKind) -> Result<Init> {
    let mut season = [seasonal.neutral(); 12];
    if seasonal != ComponentKind::None {
        let m0 = y[..12].iter().sum::<f64>() / 12.0;
        let m1 = y[12..24].iter().sum::<f64>() / 12.0;
        for (j, s) in season.iter_mut().enumerate() {
            *s = (seasonal.remove(y[j], m0) + seasonal.remove(y[j + 12], m1)) / 2.0;
        }
        match seasonal {
            ComponentKind::Additive => {
                let c = season.iter().sum::<f64>() / 12.0;
                season.iter_mut().for_each(|s| *s -= c);
            }
            ComponentKind::Multiplicative => {
                let c = season.iter().sum::<f64>() / 12.0;
                season.iter_mut().for_each(|s| *s /= c);
            }
            ComponentKind::None => {}
        }
    }
    let m = y.len().min(24);
    let z: Vec<f64> = (0..m).map(|t| seasonal.remove(y[t], season[t % 12])).collect();
    let (level, slope) = match trend {
        ComponentKind::None => (z[0], 0.0),
        ComponentKind::Additive => ols_line(&z),
        ComponentKind::Multiplicative => {
            if z.iter().any(|v| *v <= 0.0) {
                return Err(Error::Input(
                    "multiplicative trend needs positive deseasonalized values".into(),
                ));
            }
            let logs: Vec<f64> = z.iter().map(|v| v.ln()).collect();
            let (a, b) = ols_line(&logs);
            (a.exp(), b.exp())
        }
    };
    Ok(Init {
        level,
        trend: slope,
        season,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Runs the smoothing recursions with fixed parameters. The initial state
/// describes time 0; updates start at the second observation.
pub fn ets_filter(
    y: &[f64],
    trend: ComponentKind,
    seasonal: ComponentKind,
    params: Smoothing,
) -> Result<EtsState> {
    check_inputs(y, trend, seasonal)?;
    let offset = centering(y, trend, seasonal);
    let yc: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let init = initialize(&yc, trend, seasonal)?;
    Ok(run(&yc, trend, seasonal, params, &init, offset))
}

fn run(
    y: &[f64],
    trend: ComponentKind,
    seasonal: ComponentKind,
    p: Smoothing,
    init: &Init,
    offset: f64,
) -> EtsState {
    let Smoothing { alpha, beta, gamma } = p;
    let mut level = init.level;
    let mut b = init.trend;
    let mut season = init.season;
    let mut levels = Vec::with_capacity(y.len());
    levels.push(level);
    let mut sse = 0.0;
    for (t, &obs) in y.iter().enumerate().skip(1) {
        let s_old = season[t % 12];
        let comb = trend.combine(level, b);
        let err = obs - seasonal.combine(comb, s_old);
        sse += err * err;
        let new_level = alpha * seasonal.remove(obs, s_old) + (1.0 - alpha) * comb;
        b = match trend {
            ComponentKind::None => b,
            ComponentKind::Additive => beta * (new_level - level) + (1.0 - beta) * b,
            ComponentKind::Multiplicative => beta * (new_level / level) + (1.0 - beta) * b,
        };
        if seasonal != ComponentKind::None {
            season[t % 12] = gamma * seasonal.remove(obs, new_level) + (1.0 - gamma) * s_old;
        }
        level = new_level;
        levels.push(level);
    }
    let n = y.len();
    let seasonals = std::array::from_fn(|j| season[(n + j) % 12]);
    EtsState {
        trend_type: trend,
        seasonal_type: seasonal,
        alpha,
        beta,
        gamma,
        level,
        trend: b,
        seasonals,
        levels,
        sse: if sse.is_finite() { sse } else { f64::INFINITY },
        offset,
    }
}

fn check_inputs(y: &[f64], trend: ComponentKind, seasonal: ComponentKind) -> Result<()> {
    if seasonal != ComponentKind::None && y.len() < 24 {
        return Err(Error::Input(format!(
            "seasonal exponential smoothing needs 24 observations, got {}",
            y.len()
        )));
    }
    if y.len() < 3 {
        return Err(Error::Input("exponential smoothing needs at least 3 observations".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in history".into()));
    }
    let mult = trend == ComponentKind::Multiplicative || seasonal == ComponentKind::Multiplicative;
    if mult && y.iter().any(|v| *v <= 0.0) {
        return Err(Error::Input("multiplicative components need strictly positive data".into()));
    }
    Ok(())
}

/// Additive-only models are fitted on mean-removed data so that shifting the
/// history shifts the forecasts by the same amount.
fn centering(y: &[f64], trend: ComponentKind, seasonal: ComponentKind) -> f64 {
    let mult = trend == ComponentKind::Multiplicative || seasonal == ComponentKind::Multiplicative;
    if mult {
        0.0
    } else {
        y.iter().sum::<f64>() / y.len() as f64
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits α, β, γ ∈ [0, 1] by minimizing the in-sample one-step SSE.
pub fn ets_fit_values(y: &[f64], trend: ComponentKind, seasonal: ComponentKind) -> Result<EtsState> {
    check_inputs(y, trend, seasonal)?;
    let offset = centering(y, trend, seasonal);
    let yc: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let init = initialize(&yc, trend, seasonal)?;
    let has_b = trend != ComponentKind::None;
    let has_g = seasonal != ComponentKind::None;
    let unpack = |u: &[f64]| {
        let mut it = u.iter().map(|v| logistic(*v));
        let alpha = it.next().unwrap();
        let beta = if has_b { it.next().unwrap() } else { 0.0 };
        let gamma = if has_g { it.next().unwrap() } else { 0.0 };
        Smoothing { alpha, beta, gamma }
    };
    let cost = |u: &[f64]| run(&yc, trend, seasonal, unpack(u), &init, offset).sse;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for a0 in [0.2, 0.5, 0.8] {
        let mut x0 = vec![logit(a0)];
        if has_b {
            x0.push(logit(0.1));
        }
        if has_g {
            x0.push(logit(0.1));
        }
        let opts = SimplexOptions {
            step: 0.5,
            max_iters: 400,
            sd_tolerance: 1e-12,
        };
        if let Some(m) = minimize(cost, &x0, opts) {
            if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                best = Some((m.value, m.x));
            }
        }
    }
    let (_, u) = best.ok_or_else(|| {
        Error::Convergence(format!("ETS(trend={trend}, seasonal={seasonal})"))
    })?;
    Ok(run(&yc, trend, seasonal, unpack(&u), &init, offset))
}

pub fn ets_fit(
    history: &MonthSeries,
    trend: ComponentKind,
    seasonal: ComponentKind,
) -> Result<EtsState> {
    ets_fit_values(history.values(), trend, seasonal)
}

pub fn ets_forecast(state: &EtsState, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    Ok(state.forecast(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    use ComponentKind::{Additive as Add, Multiplicative as Mul, None as No};

    #[test]
    fn hand_recursion_levels() {
        let p = Smoothing {
            alpha: 0.5,
            beta: 0.0,
            gamma: 0.0,
        };
        let st = ets_filter(&[2.0, 4.0, 6.0], No, No, p).unwrap();
        // the centering offset (4) cancels; compare on the original scale
        let lv: Vec<f64> = st.levels.iter().map(|l| l + st.offset).collect();
        assert_eq!(lv, vec![2.0, 3.0, 4.5]);
        assert_eq!(st.forecast(1), vec![4.5]);
    }

    #[test]
    fn constant_series_additive() {
        let st = ets_fit_values(&[7.5; 48], Add, Add).unwrap();
        for v in st.forecast(30) {
            assert!((v - 7.5).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_series_continues() {
        let y: Vec<f64> = (0..40).map(|t| 3.0 + 0.25 * t as f64).collect();
        let st = ets_fit_values(&y, Add, No).unwrap();
        for (h, v) in st.forecast(12).iter().enumerate() {
            let truth = 3.0 + 0.25 * (40 + h) as f64;
            assert!((v - truth).abs() < 1e-9, "{v} vs {truth}");
        }
    }

    #[test]
    fn forecast_formula_properties() {
        let st = EtsState {
            trend_type: Add,
            seasonal_type: Add,
            alpha: 0.3,
            beta: 0.1,
            gamma: 0.1,
            level: 10.0,
            trend: 0.5,
            seasonals: std::array::from_fn(|j| j as f64 - 5.5),
            levels: vec![],
            sse: 0.0,
            offset: 0.0,
        };
        let f = st.forecast(13);
        assert!((f[12] - f[0] - 12.0 * 0.5).abs() < 1e-12);

        let flat = EtsState {
            trend: 0.0,
            seasonals: [0.0; 12],
            ..st.clone()
        };
        assert!(flat.forecast(5).iter().all(|v| *v == 10.0));
        let holt = EtsState {
            seasonals: [0.0; 12],
            ..st
        };
        for (h, v) in holt.forecast(6).iter().enumerate() {
            assert!((v - (10.0 + 0.5 * (h + 1) as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicative_rejects_non_positive() {
        let mut y = vec![5.0; 30];
        y[3] = 0.0;
        assert!(matches!(ets_fit_values(&y, No, Mul), Err(Error::Input(_))));
        assert!(matches!(ets_fit_values(&y, Mul, No), Err(Error::Input(_))));
    }

    #[test]
    fn seasonal_needs_two_years() {
        assert!(ets_fit_values(&[1.0; 23], No, Add).is_err());
    }

    #[test]
    fn recovers_seasonal_pattern() {
        let pattern: Vec<f64> = (0..12).map(|m| (m as f64 * 0.5).sin()).collect();
        let y: Vec<f64> = (0..72).map(|t| 20.0 + pattern[t % 12]).collect();
        let st = ets_fit_values(&y, No, Add).unwrap();
        for (h, v) in st.forecast(12).iter().enumerate() {
            assert!((v - y[(72 + h) % 12 + 60]).abs() < 1e-6);
        }
    }
}
