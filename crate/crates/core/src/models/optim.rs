//! Derivative-free minimization shared by the SARIMA and ETS fitters.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex around the starting point.
    pub step: f64,
    pub max_iters: u64,
    /// Stop once the standard deviation of simplex costs drops below this.
    pub sd_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            step: 0.1,
            max_iters: 2000,
            sd_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
}

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        let v = (self.0)(p);
        // the simplex treats NaN as incomparable; map it to +inf instead
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Nelder-Mead from `x0`. Returns `None` if no finite value was found.
pub fn minimize<F>(f: F, x0: &[f64], opts: SimplexOptions) -> Option<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    if x0.is_empty() {
        let value = f(x0);
        return value.is_finite().then(|| Minimum {
            x: Vec::new(),
            value,
            iterations: 0,
        });
    }
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.sd_tolerance)
        .ok()?;
    let res = Executor::new(Objective(f), solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .ok()?;
    let state = res.state();
    let x = state.get_best_param()?.clone();
    let value = state.get_best_cost();
    value.is_finite().then(|| Minimum {
        x,
        value,
        iterations: state.get_iter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let m = minimize(
            |p| (p[0] - 1.5).powi(2) + 2.0 * (p[1] + 0.5).powi(2),
            &[0.0, 0.0],
            SimplexOptions::default(),
        )
        .unwrap();
        assert!((m.x[0] - 1.5).abs() < 1e-4);
        assert!((m.x[1] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn nan_everywhere_is_none() {
        assert!(minimize(|_| f64::NAN, &[0.0], SimplexOptions::default()).is_none());
    }
}
