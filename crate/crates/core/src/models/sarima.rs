//! Seasonal ARIMA with period 12, estimated by conditional sum of squares.
//!
//! Sign conventions: `φ(B) = 1 − Σ φ_i B^i`, `θ(B) = 1 + Σ θ_i B^i`, and the
//! same for the seasonal polynomials in `B^12`. A mean is estimated only when
//! the model has no differencing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};

use super::check_horizon;
use super::optim::{minimize, SimplexOptions};

const S: usize = 12;
/// Bound on partial autocorrelations when a refit is forced inside the
/// stationary/invertible region.
const PACF_BOUND: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: u8,
    pub d: u8,
    pub q: u8,
    /// Seasonal AR order P.
    pub sp: u8,
    /// Seasonal differencing D.
    pub sd: u8,
    /// Seasonal MA order Q.
    pub sq: u8,
}

impl SarimaOrder {
    pub fn new(p: u8, d: u8, q: u8, sp: u8, sd: u8, sq: u8) -> Result<Self> {
        if p > 2 || q > 2 || sp > 2 || sq > 2 || d > 1 || sd > 1 {
            return Err(Error::Input(format!(
                "order ({p},{d},{q})({sp},{sd},{sq}) outside p,q,P,Q <= 2, d,D <= 1"
            )));
        }
        Ok(SarimaOrder { p, d, q, sp, sd, sq })
    }

    pub const RANDOM_WALK: SarimaOrder = SarimaOrder {
        p: 0,
        d: 1,
        q: 0,
        sp: 0,
        sd: 0,
        sq: 0,
    };

    /// Every order of the search grid in lexicographic `(p,d,q,P,D,Q)` order.
    pub fn grid() -> Vec<SarimaOrder> {
        let mut out = Vec::with_capacity(324);
        for p in 0..=2 {
            for d in 0..=1 {
                for q in 0..=2 {
                    for sp in 0..=2 {
                        for sd in 0..=1 {
                            for sq in 0..=2 {
                                out.push(SarimaOrder { p, d, q, sp, sd, sq });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// AR and MA coefficients, excluding the mean.
    pub fn n_coefficients(&self) -> usize {
        (self.p + self.q + self.sp + self.sq) as usize
    }

    pub fn has_mean(&self) -> bool {
        self.d + self.sd == 0
    }

    /// Smallest history length accepted by [`sarima_fit`].
    pub fn min_history(&self) -> usize {
        let arma = self.p as usize + self.q as usize + S * (self.sp as usize + self.sq as usize);
        2 * arma + self.d as usize + S * self.sd as usize + 12 + 1
    }

    fn ar_span(&self) -> usize {
        self.p as usize + S * self.sp as usize
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})12",
            self.p, self.d, self.q, self.sp, self.sd, self.sq
        )
    }
}

/// Coefficients of `(1 + Σ a_i B^i)(1 + Σ b_j B^{s·j})`, constant term first.
fn poly_mul_seasonal(a: &[f64], b: &[f64], s: usize) -> Vec<f64> {
    let mut left = vec![1.0];
    left.extend_from_slice(a);
    let mut right = vec![0.0; b.len() * s + 1];
    right[0] = 1.0;
    for (j, v) in b.iter().enumerate() {
        right[(j + 1) * s] = *v;
    }
    let mut out = vec![0.0; left.len() + right.len() - 1];
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            out[i + j] += l * r;
        }
    }
    out
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// Non-zero lags of a polynomial given constant-first coefficients, returned
/// as `(lag, coefficient)` for lags ≥ 1 with the sign flipped (`1 − Σ c B^i`).
fn lag_terms(poly: &[f64], flip: bool) -> Vec<(usize, f64)> {
    poly.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (i, if flip { -c } else { *c }))
        .collect()
}

/// Whether `1 − Σ a_i z^i` has all roots outside the unit circle (step-down
/// recursion on partial autocorrelations).
pub(crate) fn within_unit_region(a: &[f64]) -> bool {
    let mut a = a.to_vec();
    while let Some(&r) = a.last() {
        if !(r.abs() < 1.0) {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        a = (1..k).map(|i| (a[i - 1] + r * a[k - i - 1]) / denom).collect();
    }
    true
}

/// Coefficients `a` of `1 − Σ a_i z^i` from partial autocorrelations.
fn from_pacf(r: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(r.len());
    for (k, rk) in r.iter().enumerate() {
        let mut next: Vec<f64> = (0..k).map(|i| a[i] - rk * a[k - 1 - i]).collect();
        next.push(*rk);
        a = next;
    }
    a
}

/// Differencing operator `(1−B)^d (1−B^12)^D` as lag terms of `y_t = w_t + Σ δ_i y_{t−i}`.
fn diff_terms(order: &SarimaOrder) -> Vec<(usize, f64)> {
    let mut poly = vec![1.0];
    let mut apply = |lag: usize| {
        let mut next = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + lag] -= c;
        }
        poly = next;
    };
    for _ in 0..order.d {
        apply(1);
    }
    for _ in 0..order.sd {
        apply(S);
    }
    lag_terms(&poly, true)
}

fn difference(y: &[f64], terms: &[(usize, f64)]) -> Vec<f64> {
    let span = terms.iter().map(|(l, _)| *l).max().unwrap_or(0);
    (span..y.len())
        .map(|t| y[t] - terms.iter().map(|(l, c)| c * y[t - l]).sum::<f64>())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Coefficients {
    ar: Vec<f64>,
    sar: Vec<f64>,
    ma: Vec<f64>,
    sma: Vec<f64>,
    mean: f64,
}

impl Coefficients {
    fn from_vec(order: &SarimaOrder, v: &[f64], mean_default: f64) -> Self {
        let (p, q, sp, sq) = (
            order.p as usize,
            order.q as usize,
            order.sp as usize,
            order.sq as usize,
        );
        let mut it = v.iter().copied();
        let mut take = |n: usize| (0..n).map(|_| it.next().unwrap()).collect::<Vec<_>>();
        let ar = take(p);
        let sar = take(sp);
        let ma = take(q);
        let sma = take(sq);
        let mean = if order.has_mean() {
            take(1)[0]
        } else {
            mean_default
        };
        Coefficients {
            ar,
            sar,
            ma,
            sma,
            mean,
        }
    }

    /// Maps unconstrained reals to coefficients whose polynomials lie
    /// inside the unit region.
    fn from_unconstrained(order: &SarimaOrder, u: &[f64]) -> Self {
        let squash = |v: &[f64]| from_pacf(&v.iter().map(|x| PACF_BOUND * x.tanh()).collect::<Vec<_>>());
        let mut c = Coefficients::from_vec(order, u, 0.0);
        c.ar = squash(&c.ar);
        c.sar = squash(&c.sar);
        c.ma = neg(&squash(&c.ma));
        c.sma = neg(&squash(&c.sma));
        c
    }

    fn admissible(&self) -> bool {
        within_unit_region(&self.ar)
            && within_unit_region(&self.sar)
            && within_unit_region(&neg(&self.ma))
            && within_unit_region(&neg(&self.sma))
    }

    fn ar_terms(&self) -> Vec<(usize, f64)> {
        lag_terms(&poly_mul_seasonal(&neg(&self.ar), &neg(&self.sar), S), true)
    }

    fn ma_terms(&self) -> Vec<(usize, f64)> {
        lag_terms(&poly_mul_seasonal(&self.ma, &self.sma, S), false)
    }
}

/// One-step residuals `e_t = x_t − Σ a_i x_{t−i} − Σ c_j e_{t−j}`, conditioning
/// on the first `start` values (their residuals are zero).
fn css_residuals(x: &[f64], ar: &[(usize, f64)], ma: &[(usize, f64)], start: usize) -> Vec<f64> {
    let mut e = vec![0.0; x.len()];
    for t in start..x.len() {
        let mut v = x[t];
        for (l, a) in ar {
            v -= a * x[t - l];
        }
        for (l, c) in ma {
            if *l <= t {
                v -= c * e[t - l];
            }
        }
        e[t] = v;
    }
    e
}

#[derive(Debug, Clone)]
pub struct SarimaModel {
    pub order: SarimaOrder,
    pub ar: Vec<f64>,
    pub sar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sma: Vec<f64>,
    /// Mean of the (undifferenced) series; `None` when the model differences.
    pub mean: Option<f64>,
    pub sse: f64,
    pub sigma2: f64,
    /// Residuals contributing to the sum of squares.
    pub n_eff: usize,
    pub aic: f64,
    /// True when the unconstrained optimum was inadmissible and the model was
    /// refitted inside the stationary/invertible region.
    pub constrained: bool,
    history: Vec<f64>,
    x: Vec<f64>,
    resid: Vec<f64>,
}

impl SarimaModel {
    /// Builds a model from given coefficients, computing residuals and AIC on
    /// `history`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_coefficients(
        history: &[f64],
        order: SarimaOrder,
        ar: Vec<f64>,
        sar: Vec<f64>,
        ma: Vec<f64>,
        sma: Vec<f64>,
        mean: Option<f64>,
    ) -> Result<Self> {
        let lens_ok = ar.len() == order.p as usize
            && sar.len() == order.sp as usize
            && ma.len() == order.q as usize
            && sma.len() == order.sq as usize
            && mean.is_some() == order.has_mean();
        if !lens_ok {
            return Err(Error::Input(format!("coefficient counts do not match order {order}")));
        }
        let c = Coefficients {
            ar,
            sar,
            ma,
            sma,
            mean: mean.unwrap_or(0.0),
        };
        Ok(Self::assemble(history, order, c, false))
    }

    fn assemble(history: &[f64], order: SarimaOrder, c: Coefficients, constrained: bool) -> Self {
        let w = difference(history, &diff_terms(&order));
        let x: Vec<f64> = w.iter().map(|v| v - c.mean).collect();
        let start = order.ar_span().min(x.len());
        let resid = css_residuals(&x, &c.ar_terms(), &c.ma_terms(), start);
        let sse: f64 = resid.iter().map(|e| e * e).sum();
        let n_eff = x.len() - start;
        let scale = history.iter().map(|v| v * v).sum::<f64>() / history.len().max(1) as f64;
        let sigma2 = (sse / n_eff.max(1) as f64).max(1e-20 * scale).max(f64::MIN_POSITIVE);
        let k = order.n_coefficients() + usize::from(order.has_mean());
        let aic = n_eff as f64 * sigma2.ln() + 2.0 * (k as f64 + 1.0);
        SarimaModel {
            order,
            mean: order.has_mean().then_some(c.mean),
            ar: c.ar,
            sar: c.sar,
            ma: c.ma,
            sma: c.sma,
            sse,
            sigma2,
            n_eff,
            aic,
            constrained,
            history: history.to_vec(),
            x,
            resid,
        }
    }

    /// Conditional-sum-of-squares fit on raw values (no positivity required).
    pub fn fit_values(y: &[f64], order: SarimaOrder) -> Result<Self> {
        if y.len() < order.min_history() {
            return Err(Error::Input(format!(
                "order {order} needs more than {} observations, got {}",
                order.min_history() - 1,
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite value in history".into()));
        }
        let w = difference(y, &diff_terms(&order));
        let w_mean = w.iter().sum::<f64>() / w.len() as f64;
        let start = order.ar_span();
        let cost = |c: &Coefficients| {
            let x: Vec<f64> = w.iter().map(|v| v - c.mean).collect();
            css_residuals(&x, &c.ar_terms(), &c.ma_terms(), start)
                .iter()
                .map(|e| e * e)
                .sum::<f64>()
        };
        let dim = order.n_coefficients() + usize::from(order.has_mean());
        let mut x0 = vec![0.0; dim];
        if order.has_mean() {
            x0[dim - 1] = w_mean;
        }
        let opts = SimplexOptions {
            step: 0.1,
            max_iters: 300 * (dim as u64 + 1),
            sd_tolerance: 1e-12,
        };
        // the mean is searched on the data's own scale
        let mean_step = w.iter().map(|v| (v - w_mean).abs()).fold(0.0, f64::max).max(1e-8);
        let rescale = |v: &[f64]| -> Vec<f64> {
            let mut out = v.to_vec();
            if order.has_mean() {
                out[dim - 1] = w_mean + (v[dim - 1] - w_mean) * mean_step;
            }
            out
        };
        let unconstrained = minimize(
            |v| cost(&Coefficients::from_vec(&order, &rescale(v), 0.0)),
            &x0,
            opts,
        )
        .ok_or_else(|| Error::Convergence(format!("SARIMA{order}")))?;
        let c = Coefficients::from_vec(&order, &rescale(&unconstrained.x), 0.0);
        if c.admissible() {
            return Ok(Self::assemble(y, order, c, false));
        }
        let constrained = minimize(
            |v| cost(&Coefficients::from_unconstrained(&order, &rescale(v))),
            &x0,
            opts,
        )
        .ok_or_else(|| Error::Convergence(format!("SARIMA{order} (constrained refit)")))?;
        let mut c = Coefficients::from_unconstrained(&order, &rescale(&constrained.x));
        if !order.has_mean() {
            c.mean = 0.0;
        }
        Ok(Self::assemble(y, order, c, true))
    }

    /// Recursive mean forecasts, future innovations set to zero.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let c = Coefficients {
            ar: self.ar.clone(),
            sar: self.sar.clone(),
            ma: self.ma.clone(),
            sma: self.sma.clone(),
            mean: self.mean.unwrap_or(0.0),
        };
        let (ar, ma) = (c.ar_terms(), c.ma_terms());
        let mut x = self.x.clone();
        let mut e = self.resid.clone();
        let mut y = self.history.clone();
        let dterms = diff_terms(&self.order);
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let t = x.len();
            let mut xh = 0.0;
            for (l, a) in &ar {
                if *l <= t {
                    xh += a * x[t - l];
                }
            }
            for (l, m) in &ma {
                if *l <= t {
                    xh += m * e[t - l];
                }
            }
            x.push(xh);
            e.push(0.0);
            let ty = y.len();
            let yh = xh + c.mean + dterms.iter().map(|(l, d)| d * y[ty - l]).sum::<f64>();
            y.push(yh);
            out.push(yh);
        }
        out
    }
}

pub fn sarima_fit(history: &MonthSeries, order: SarimaOrder) -> Result<SarimaModel> {
    SarimaModel::fit_values(history.values(), order)
}

pub fn sarima_forecast(model: &SarimaModel, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    Ok(model.forecast(h))
}

/// Minimum-AIC order over the grid; ties go to fewer coefficients, then the
/// lexicographically smaller order. A constant history has no information to
/// rank orders and returns the random walk.
pub fn sarima_select(history: &MonthSeries) -> Result<SarimaOrder> {
    select_values(history.values()).map(|m| m.order)
}

/// Like [`sarima_select`] but returns the fitted winner.
pub fn sarima_select_fit(history: &MonthSeries) -> Result<SarimaModel> {
    select_values(history.values())
}

pub(crate) fn select_values(y: &[f64]) -> Result<SarimaModel> {
    if let Some(first) = y.first() {
        if y.iter().all(|v| v == first) && y.len() >= SarimaOrder::RANDOM_WALK.min_history() {
            return SarimaModel::fit_values(y, SarimaOrder::RANDOM_WALK);
        }
    }
    let mut best: Option<SarimaModel> = None;
    let mut failures = Vec::new();
    for order in SarimaOrder::grid() {
        if y.len() < order.min_history() {
            continue;
        }
        match SarimaModel::fit_values(y, order) {
            Ok(m) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        m.aic
                            .total_cmp(&b.aic)
                            .then(m.order.n_coefficients().cmp(&b.order.n_coefficients()))
                            .then(m.order.cmp(&b.order))
                            .is_lt()
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => failures.push(format!("{order}: {e}")),
        }
    }
    best.ok_or_else(|| {
        Error::Selection(if failures.is_empty() {
            format!("history of {} months is too short for every SARIMA order", y.len())
        } else {
            failures.join("; ")
        })
    })
}
