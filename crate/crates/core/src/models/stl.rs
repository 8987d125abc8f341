//! Seasonal-trend decomposition by loess (period 12), with a
//! decomposition-based forecaster.

use serde::{Deserialize, Serialize};

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};

use super::check_horizon;
use super::ets::{ets_fit_values, ComponentKind};

const PERIOD: usize = 12;
const INNER_ITERATIONS: usize = 2;
const OUTER_ITERATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StlParams {
    /// Seasonal smoothing window (odd, ≥ 7).
    pub n_s: usize,
    /// Trend window; `None` picks the usual default from `n_s`.
    pub n_t: Option<usize>,
    pub robust: bool,
}

impl StlParams {
    pub fn new(n_s: usize, n_t: Option<usize>) -> Self {
        StlParams {
            n_s,
            n_t,
            robust: true,
        }
    }

    /// Smallest odd integer ≥ 1.5·12 / (1 − 1.5/n_s).
    pub fn default_trend_window(n_s: usize) -> usize {
        let raw = 1.5 * PERIOD as f64 / (1.0 - 1.5 / n_s as f64);
        next_odd(raw.ceil() as usize)
    }

    fn trend_window(&self) -> usize {
        self.n_t.unwrap_or_else(|| Self::default_trend_window(self.n_s))
    }
}

fn next_odd(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlComponents {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub n_s: usize,
    pub n_t: usize,
}

/// Degree-1 loess of `y` (at positions 0..n) evaluated at position `x`,
/// using the `q` nearest points with tricube distance weights times `rw`.
fn loess_point(y: &[f64], rw: Option<&[f64]>, q: usize, x: f64) -> Option<f64> {
    let n = y.len();
    if n == 0 {
        return None;
    }
    // bandwidth: distance to the q-th nearest point, widened when q > n
    let h = if q <= n {
        let mut lo = (x.round().max(0.0) as usize).min(n - 1);
        let mut hi = lo;
        while hi - lo + 1 < q {
            let left = if lo > 0 { x - (lo - 1) as f64 } else { f64::INFINITY };
            let right = if hi + 1 < n { (hi + 1) as f64 - x } else { f64::INFINITY };
            if left <= right {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        (x - lo as f64).max(hi as f64 - x)
    } else {
        (x).max((n - 1) as f64 - x) + (q - n) as f64 / 2.0
    };
    let h = h.max(0.5);
    let lo = ((x - h).ceil().max(0.0)) as usize;
    let hi = ((x + h).floor() as isize).min(n as isize - 1);
    if hi < lo as isize {
        return None;
    }
    let hi = hi as usize;
    let (h9, h1) = (0.999 * h, 0.001 * h);
    let mut w = Vec::with_capacity(hi - lo + 1);
    let mut total = 0.0;
    for j in lo..=hi {
        let r = (j as f64 - x).abs();
        let mut wj = if r <= h1 {
            1.0
        } else if r <= h9 {
            (1.0 - (r / h).powi(3)).powi(3)
        } else {
            0.0
        };
        if let Some(rw) = rw {
            wj *= rw[j];
        }
        total += wj;
        w.push(wj);
    }
    if total <= 0.0 {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= total);
    let xm: f64 = w.iter().enumerate().map(|(i, wi)| wi * (lo + i) as f64).sum();
    let var: f64 = w
        .iter()
        .enumerate()
        .map(|(i, wi)| wi * ((lo + i) as f64 - xm).powi(2))
        .sum();
    let range = (n - 1) as f64;
    if var.sqrt() > 0.001 * range {
        let slope_num: f64 = w
            .iter()
            .enumerate()
            .map(|(i, wi)| wi * ((lo + i) as f64 - xm) * y[lo + i])
            .sum();
        let ym: f64 = w.iter().enumerate().map(|(i, wi)| wi * y[lo + i]).sum();
        Some(ym + slope_num / var * (x - xm))
    } else {
        Some(w.iter().enumerate().map(|(i, wi)| wi * y[lo + i]).sum())
    }
}

/// Loess at each point in `xs`; falls back to unweighted fits where all
/// robustness weights in a window vanish.
fn loess(y: &[f64], rw: Option<&[f64]>, q: usize, xs: impl Iterator<Item = f64>) -> Vec<f64> {
    xs.map(|x| {
        loess_point(y, rw, q, x)
            .or_else(|| loess_point(y, None, q, x))
            .unwrap_or(0.0)
    })
    .collect()
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    if x.len() < len {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(x.len() - len + 1);
    let mut sum: f64 = x[..len].iter().sum();
    out.push(sum / len as f64);
    for i in len..x.len() {
        sum += x[i] - x[i - len];
        out.push(sum / len as f64);
    }
    out
}

fn inner_loop(
    y: &[f64],
    trend: &mut [f64],
    seasonal: &mut [f64],
    rw: Option<&[f64]>,
    n_s: usize,
    n_t: usize,
    n_l: usize,
) {
    let n = y.len();
    for _ in 0..INNER_ITERATIONS {
        let detrended: Vec<f64> = y.iter().zip(trend.iter()).map(|(a, b)| a - b).collect();
        // cycle-subseries smoothing, extended one period at each end
        let mut c = vec![0.0; n + 2 * PERIOD];
        for j in 0..PERIOD {
            let idx: Vec<usize> = (j..n).step_by(PERIOD).collect();
            let sub: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
            let sub_rw: Option<Vec<f64>> = rw.map(|r| idx.iter().map(|&i| r[i]).collect());
            let k = sub.len();
            let sm = loess(&sub, sub_rw.as_deref(), n_s, (-1..=k as isize).map(|v| v as f64));
            for (m, v) in sm.into_iter().enumerate() {
                // position m-1 of the subseries sits at time j + (m-1)·12
                c[j + m * PERIOD] = v;
            }
        }
        // low-pass filter of the cycle-subseries
        let l1 = moving_average(&c, PERIOD);
        let l2 = moving_average(&l1, PERIOD);
        let l3 = moving_average(&l2, 3);
        let low = loess(&l3, None, n_l, (0..n).map(|v| v as f64));
        for i in 0..n {
            seasonal[i] = c[i + PERIOD] - low[i];
        }
        let deseason: Vec<f64> = y.iter().zip(seasonal.iter()).map(|(a, b)| a - b).collect();
        let t = loess(&deseason, rw, n_t, (0..n).map(|v| v as f64));
        trend.copy_from_slice(&t);
    }
}

fn bisquare_weights(resid: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    let h = 6.0 * median;
    resid
        .iter()
        .map(|r| {
            if h <= 0.0 {
                return 1.0;
            }
            let u = r.abs() / h;
            if u <= 0.001 {
                1.0
            } else if u < 0.999 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// STL decomposition on raw values.
pub fn stl_decompose_values(y: &[f64], params: StlParams) -> Result<StlComponents> {
    let n = y.len();
    if n < 2 * PERIOD {
        return Err(Error::Input(format!(
            "STL needs at least two full years, got {n} months"
        )));
    }
    if params.n_s < 7 || params.n_s.is_multiple_of(2) {
        return Err(Error::Input(format!(
            "seasonal window must be odd and at least 7, got {}",
            params.n_s
        )));
    }
    let n_t = params.trend_window();
    if n_t.is_multiple_of(2) || n_t < 3 {
        return Err(Error::Input(format!("trend window must be odd and at least 3, got {n_t}")));
    }
    if params.n_s > n || n_t > n {
        return Err(Error::Input(format!(
            "window (seasonal {}, trend {n_t}) longer than the {n}-month series",
            params.n_s
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in history".into()));
    }
    let n_l = next_odd(PERIOD);
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    inner_loop(y, &mut trend, &mut seasonal, None, params.n_s, n_t, n_l);
    if params.robust {
        for _ in 0..OUTER_ITERATIONS {
            let resid: Vec<f64> = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
            let rw = bisquare_weights(&resid);
            inner_loop(y, &mut trend, &mut seasonal, Some(&rw), params.n_s, n_t, n_l);
        }
    }
    let residual = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    Ok(StlComponents {
        trend,
        seasonal,
        residual,
        n_s: params.n_s,
        n_t,
    })
}

pub fn stl_decompose(history: &MonthSeries, params: StlParams) -> Result<StlComponents> {
    stl_decompose_values(history.values(), params)
}

/// Last seasonal cycle repeated, plus Holt's linear method on the trend.
pub fn stl_forecast(comp: &StlComponents, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    let n = comp.trend.len();
    if n < PERIOD || comp.seasonal.len() != n {
        return Err(Error::Input("STL components shorter than one period".into()));
    }
    let holt = ets_fit_values(&comp.trend, ComponentKind::Additive, ComponentKind::None)?;
    let trend_path = holt.forecast(h);
    let cycle = &comp.seasonal[n - PERIOD..];
    Ok((0..h).map(|j| trend_path[j] + cycle[j % PERIOD]).collect())
}
