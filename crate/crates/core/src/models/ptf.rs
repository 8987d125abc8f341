//! Piecewise-linear trend plus Fourier seasonality, fitted as a penalized
//! least-squares (MAP) problem.
//!
//! The trend is `k·t + m + Σ δ_j (t − c_j)_+`, which is continuous by
//! construction. Slope changes carry an L1 penalty with scale `τ`, Fourier
//! coefficients an L2 penalty with scale `σ_s`. Time is rescaled to `[0, 1]`
//! over the training window and the response is divided by the residual RMS
//! of a straight-line fit, so `τ` and `σ_s` are unit-free.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};

use super::check_horizon;

pub const N_CHANGEPOINTS: usize = 25;
pub const FOURIER_ORDER: usize = 10;
const PERIOD: f64 = 12.0;
const SIGMA_ROUNDS: usize = 5;
const MAX_SWEEPS: usize = 20_000;
const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtfMode {
    Additive,
    Multiplicative,
}

impl fmt::Display for PtfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PtfMode::Additive => "add",
            PtfMode::Multiplicative => "mul",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtfParams {
    /// Changepoint prior scale τ.
    pub changepoint_scale: f64,
    /// Seasonality prior scale σ_s.
    pub seasonality_scale: f64,
    pub mode: PtfMode,
    /// Fraction of the history eligible for changepoints.
    pub cp_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtfModel {
    pub params: PtfParams,
    /// Base slope and offset, in scaled units.
    pub k: f64,
    pub m: f64,
    pub delta: Vec<f64>,
    /// Changepoint locations in scaled time.
    pub changepoints: Vec<f64>,
    /// Cosine coefficients `a_n` and sine coefficients `b_n`, n = 1..=10.
    pub fourier_cos: Vec<f64>,
    pub fourier_sin: Vec<f64>,
    /// Response scale; fitted values are `scale · (trend + seasonal)`.
    pub scale: f64,
    /// Length of the training history.
    pub n: usize,
    pub sigma: f64,
}

impl PtfModel {
    /// Continuity-enforcing offset adjustments `γ_j = −c_j δ_j`.
    pub fn offset_adjustments(&self) -> Vec<f64> {
        self.changepoints
            .iter()
            .zip(&self.delta)
            .map(|(c, d)| -c * d)
            .collect()
    }

    fn time_scale(&self) -> f64 {
        (self.n.max(2) - 1) as f64
    }

    /// Trend slope after the last changepoint, per month, in data units
    /// (log units in multiplicative mode).
    pub fn final_slope(&self) -> f64 {
        (self.k + self.delta.iter().sum::<f64>()) * self.scale / self.time_scale()
    }

    /// Model value at month index `t` (0 = first training month), on the
    /// fitted scale (log scale in multiplicative mode).
    pub fn evaluate(&self, t: usize) -> f64 {
        let ts = t as f64 / self.time_scale();
        let mut g = self.k * ts + self.m;
        for (c, d) in self.changepoints.iter().zip(&self.delta) {
            if ts > *c {
                g += d * (ts - c);
            }
        }
        let mut s = 0.0;
        for n in 1..=FOURIER_ORDER {
            let arg = 2.0 * PI * n as f64 * t as f64 / PERIOD;
            s += self.fourier_cos[n - 1] * arg.cos() + self.fourier_sin[n - 1] * arg.sin();
        }
        (g + s) * self.scale
    }

    pub fn forecast(&self, h: usize) -> Vec<f64> {
        (self.n..self.n + h)
            .map(|t| {
                let v = self.evaluate(t);
                match self.params.mode {
                    PtfMode::Additive => v,
                    PtfMode::Multiplicative => v.exp(),
                }
            })
            .collect()
    }
}

/// Changepoint positions (month index) spread over the first `cp_range` of
/// the history, excluding the origin.
fn changepoint_positions(n: usize, cp_range: f64) -> Vec<f64> {
    let span = ((cp_range * n as f64).floor() - 1.0).max(0.0);
    (1..=N_CHANGEPOINTS)
        .map(|j| j as f64 / N_CHANGEPOINTS as f64 * span)
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Penalty {
    Free,
    L1,
    L2,
}

pub fn ptf_fit_values(y: &[f64], params: PtfParams) -> Result<PtfModel> {
    let n = y.len();
    if n < 36 {
        return Err(Error::Input(format!("piecewise-trend model needs 36 months, got {n}")));
    }
    if !(params.changepoint_scale > 0.0 && params.seasonality_scale > 0.0) {
        return Err(Error::Input("prior scales must be positive".into()));
    }
    if !(params.cp_range > 0.0 && params.cp_range <= 1.0) {
        return Err(Error::Input(format!("cp_range {} outside (0, 1]", params.cp_range)));
    }
    let z: Vec<f64> = match params.mode {
        PtfMode::Additive => y.to_vec(),
        PtfMode::Multiplicative => {
            if y.iter().any(|v| *v <= 0.0) {
                return Err(Error::Input("multiplicative mode needs strictly positive data".into()));
            }
            y.iter().map(|v| v.ln()).collect()
        }
    };
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in history".into()));
    }

    let tscale = (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|t| t as f64 / tscale).collect();

    // response scale from the residuals of a straight-line fit
    let (a0, b0) = line_fit(&ts, &z);
    let rms = (z
        .iter()
        .zip(&ts)
        .map(|(v, t)| (v - a0 - b0 * t).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let scale = if rms > 1e-9 { rms } else { 1.0 };
    let ys: Vec<f64> = z.iter().map(|v| v / scale).collect();

    let cps: Vec<f64> = changepoint_positions(n, params.cp_range)
        .into_iter()
        .map(|c| c / tscale)
        .collect();

    // design: [t, 1, (t-c_j)_+ ..., cos_1, sin_1, ..., cos_N, sin_N]
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut pen = Vec::new();
    cols.push(ts.clone());
    pen.push(Penalty::Free);
    cols.push(vec![1.0; n]);
    pen.push(Penalty::Free);
    for c in &cps {
        cols.push(ts.iter().map(|t| (t - c).max(0.0)).collect());
        pen.push(Penalty::L1);
    }
    for k in 1..=FOURIER_ORDER {
        let f = |g: fn(f64) -> f64| -> Vec<f64> {
            (0..n)
                .map(|t| g(2.0 * PI * k as f64 * t as f64 / PERIOD))
                .collect()
        };
        cols.push(f(f64::cos));
        pen.push(Penalty::L2);
        cols.push(f(f64::sin));
        pen.push(Penalty::L2);
    }
    let p = cols.len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..p {
        xty[i] = cols[i].iter().zip(&ys).map(|(a, b)| a * b).sum();
        for j in i..p {
            let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }
    let yty: f64 = ys.iter().map(|v| v * v).sum();

    // start from the straight-line fit (in scaled units)
    let mut w = vec![0.0; p];
    w[0] = b0 / scale;
    w[1] = a0 / scale;
    let mut sigma2: f64 = 1.0;
    let sigma2_floor = 1e-10;
    for _ in 0..SIGMA_ROUNDS {
        let l1 = sigma2 / params.changepoint_scale;
        let l2 = sigma2 / (params.seasonality_scale * params.seasonality_scale);
        coordinate_descent(&gram, &xty, &pen, l1, l2, &mut w);
        // residual sum of squares from the Gram form
        let mut rss = yty;
        for i in 0..p {
            rss -= 2.0 * w[i] * xty[i];
            for j in 0..p {
                rss += w[i] * gram[i][j] * w[j];
            }
        }
        sigma2 = (rss.max(0.0) / n as f64).max(sigma2_floor);
    }

    let delta = w[2..2 + N_CHANGEPOINTS].to_vec();
    let four = &w[2 + N_CHANGEPOINTS..];
    Ok(PtfModel {
        params,
        k: w[0],
        m: w[1],
        delta,
        changepoints: cps,
        fourier_cos: four.iter().step_by(2).copied().collect(),
        fourier_sin: four.iter().skip(1).step_by(2).copied().collect(),
        scale,
        n,
        sigma: sigma2.sqrt() * scale,
    })
}

fn line_fit(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - b * tm, b)
}

/// Minimizes `½‖y − Xw‖² + l1·Σ_{L1}|w_j| + ½·l2·Σ_{L2} w_j²` by cyclic
/// coordinate descent on the Gram matrix.
fn coordinate_descent(
    gram: &[Vec<f64>],
    xty: &[f64],
    pen: &[Penalty],
    l1: f64,
    l2: f64,
    w: &mut [f64],
) {
    let p = w.len();
    // gw = G·w maintained incrementally
    let mut gw: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| gram[i][j] * w[j]).sum())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = gram[j][j];
            let rho = xty[j] - gw[j] + gjj * w[j];
            let new = match pen[j] {
                Penalty::Free if gjj > 0.0 => rho / gjj,
                Penalty::L1 if gjj > 0.0 => soft_threshold(rho, l1) / gjj,
                Penalty::L2 if gjj + l2 > 0.0 => rho / (gjj + l2),
                _ => 0.0,
            };
            let diff = new - w[j];
            if diff != 0.0 {
                for i in 0..p {
                    gw[i] += gram[i][j] * diff;
                }
                w[j] = new;
                max_change = max_change.max(diff.abs() * gjj.sqrt());
            }
        }
        if max_change < TOLERANCE {
            break;
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub fn ptf_fit(history: &MonthSeries, params: PtfParams) -> Result<PtfModel> {
    ptf_fit_values(history.values(), params)
}

pub fn ptf_forecast(model: &PtfModel, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    Ok(model.forecast(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau: f64, sigma_s: f64) -> PtfParams {
        PtfParams {
            changepoint_scale: tau,
            seasonality_scale: sigma_s,
            mode: PtfMode::Additive,
            cp_range: 0.8,
        }
    }

    #[test]
    fn changepoints_inside_range() {
        let cps = changepoint_positions(120, 0.8);
        assert_eq!(cps.len(), N_CHANGEPOINTS);
        assert!(cps.iter().all(|c| *c > 0.0 && *c <= 95.0));
        assert_eq!(*cps.last().unwrap(), 95.0);
    }

    #[test]
    fn single_kink_is_recovered() {
        // n = 101: span = floor(80.8) - 1 = 79, cp_j = 3.16 j; kink at cp 15 = 47.4
        let n = 101;
        let kink = changepoint_positions(n, 0.8)[14];
        let truth = |t: f64| 10.0 + 0.05 * t + 0.15 * (t - kink).max(0.0);
        let y: Vec<f64> = (0..n).map(|t| truth(t as f64)).collect();
        let m = ptf_fit_values(&y, params(10.0, 1e-4)).unwrap();
        let total: f64 = m.delta.iter().map(|d| d.abs()).sum();
        assert!(m.delta[14].abs() > 0.9 * total, "{:?}", m.delta);
        for (h, v) in m.forecast(12).iter().enumerate() {
            let t = (n + h) as f64;
            assert!((v - truth(t)).abs() < 0.01 * truth(t), "h={h}: {v} vs {}", truth(t));
        }
    }

    #[test]
    fn tiny_tau_collapses_to_one_line() {
        let y: Vec<f64> = (0..60)
            .map(|t| 5.0 + 0.1 * t as f64 + if t > 30 { 0.3 * (t - 30) as f64 } else { 0.0 })
            .collect();
        let m = ptf_fit_values(&y, params(1e-6, 1.0)).unwrap();
        assert!(m.delta.iter().all(|d| d.abs() < 1e-9), "{:?}", m.delta);
    }

    #[test]
    fn sinusoid_loads_on_first_harmonic() {
        let y: Vec<f64> = (0..72)
            .map(|t| 20.0 + 2.0 * (2.0 * PI * t as f64 / 12.0).sin())
            .collect();
        let m = ptf_fit_values(&y, params(0.05, 10.0)).unwrap();
        let first = m.fourier_cos[0].hypot(m.fourier_sin[0]);
        let rest: f64 = (1..FOURIER_ORDER)
            .map(|n| m.fourier_cos[n].hypot(m.fourier_sin[n]))
            .sum();
        assert!(rest < 1e-3 * first, "first {first}, rest {rest}");
    }

    #[test]
    fn forecast_slope_and_periodicity() {
        let y: Vec<f64> = (0..48)
            .map(|t| 3.0 + 0.02 * t as f64 + (t as f64 * 0.8).sin() * 0.3)
            .collect();
        let m = ptf_fit_values(&y, params(0.5, 1.0)).unwrap();
        let f = m.forecast(24);
        for h in 0..12 {
            assert!((f[h + 12] - f[h] - 12.0 * m.final_slope()).abs() < 1e-9);
        }
        let flat = PtfModel {
            fourier_cos: vec![0.0; FOURIER_ORDER],
            fourier_sin: vec![0.0; FOURIER_ORDER],
            ..m.clone()
        };
        let g = flat.forecast(5);
        for h in 1..5 {
            assert!((g[h] - g[h - 1] - flat.final_slope()).abs() < 1e-9);
        }
        let periodic = PtfModel {
            k: 0.0,
            m: 0.0,
            delta: vec![0.0; N_CHANGEPOINTS],
            ..m
        };
        let p = periodic.forecast(24);
        for h in 0..12 {
            assert!((p[h + 12] - p[h]).abs() < 1e-9);
        }
    }

    #[test]
    fn multiplicative_needs_positive_data() {
        let mut y = vec![1.0; 40];
        y[5] = -1.0;
        let p = PtfParams {
            mode: PtfMode::Multiplicative,
            ..params(0.05, 1.0)
        };
        assert!(matches!(ptf_fit_values(&y, p), Err(Error::Input(_))));
        assert!(ptf_fit_values(&[1.0; 35], params(0.05, 1.0)).is_err());
    }
}
