use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Bandwidth for pooled monthly comparisons (12-step horizon).
pub const MONTHLY_BANDWIDTH: usize = 11;
/// Bandwidth for annual MYA comparisons.
pub const MYA_BANDWIDTH: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub mean_diff: f64,
    /// Newey-West variance of the mean differential.
    pub hac_variance: f64,
    /// Positive when the second loss sequence is smaller.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub bandwidth: usize,
}

/// Diebold-Mariano test on `d_t = loss_a,t − loss_b,t` with a Bartlett-kernel
/// HAC variance and a two-sided normal p-value.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], bandwidth: usize) -> Result<DmResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Input(format!(
            "loss sequences differ in length ({} vs {})",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let n = loss_a.len();
    if n < 2 {
        return Err(Error::Input("Diebold-Mariano test needs at least two losses".into()));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite loss differential".into()));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let dev: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let autocov = |j: usize| dev[j..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / nf;
    let mut lrv = autocov(0);
    for j in 1..=bandwidth.min(n - 1) {
        let w = 1.0 - j as f64 / (bandwidth as f64 + 1.0);
        lrv += 2.0 * w * autocov(j);
    }
    let var = lrv / nf;
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let degenerate = var <= (1e-12 * scale).powi(2);
    let (statistic, p_value) = if mean == 0.0 && (degenerate || scale == 0.0) {
        (0.0, 1.0)
    } else if degenerate {
        return Err(Error::DegenerateVariance(mean));
    } else {
        let s = mean / var.sqrt();
        (s, erfc(s.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    };
    Ok(DmResult {
        mean_diff: mean,
        hac_variance: var,
        statistic,
        p_value,
        n,
        bandwidth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_losses() {
        let a = [0.3, 0.1, 0.7, 0.2];
        let r = dm_test(&a, &a, 3).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn alternating_differential() {
        let a: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 2.0 } else { 0.0 }).collect();
        let b = vec![1.0; 10];
        let r = dm_test(&a, &b, 1).unwrap();
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let a = [1.5, 2.5, 3.5];
        let b = [1.0, 2.0, 3.0];
        assert!(matches!(dm_test(&a, &b, 1), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn sign_convention() {
        let a = [1.0, 1.2, 0.9, 1.4, 1.1, 1.3];
        let b = [0.5, 0.4, 0.6, 0.3, 0.7, 0.2];
        let r = dm_test(&a, &b, 1).unwrap();
        assert!(r.statistic > 0.0 && r.p_value < 0.05);
    }
}
