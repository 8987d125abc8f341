use crate::calendar::MonthSeries;
use crate::error::{Error, Result};

use super::check_horizon;

/// Random walk: every horizon repeats the last observation.
pub fn naive_forecast(history: &MonthSeries, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    let last = history
        .values()
        .last()
        .ok_or_else(|| Error::Input("naive forecast needs a non-empty history".into()))?;
    Ok(vec![*last; h])
}

/// Same month one year earlier. Past the first year the last observed cycle
/// repeats.
pub fn seasonal_naive_forecast(history: &MonthSeries, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    let v = history.values();
    if v.len() < 12 {
        return Err(Error::Input(format!(
            "seasonal naive needs at least 12 observations, got {}",
            v.len()
        )));
    }
    let cycle = &v[v.len() - 12..];
    Ok((0..h).map(|j| cycle[j % 12]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthStamp;

    fn series(v: Vec<f64>) -> MonthSeries {
        MonthSeries::new(MonthStamp::ym(2000, 1), v).unwrap()
    }

    #[test]
    fn naive_repeats_last() {
        let s = series(vec![3.0, 4.0, 5.0]);
        assert_eq!(naive_forecast(&s, 12).unwrap(), vec![5.0; 12]);
        assert_eq!(naive_forecast(&s, 1).unwrap(), vec![5.0]);
        assert!(naive_forecast(&series(vec![]), 1).is_err());
    }

    #[test]
    fn seasonal_naive_cycles() {
        let cycle: Vec<f64> = (1..=12).map(f64::from).collect();
        let s = series([cycle.clone(), cycle.clone()].concat());
        assert_eq!(seasonal_naive_forecast(&s, 12).unwrap(), cycle);
        assert!(seasonal_naive_forecast(&series(cycle[..11].to_vec()), 1).is_err());
    }

    #[test]
    fn seasonal_naive_two_years_unrolled() {
        // hand recursion: yhat[t] = y[t-12], with forecasts standing in once
        // the lag runs past the observed data
        let obs: Vec<f64> = (1..=12).map(|m| 10.0 + m as f64).collect();
        let mut ext = obs.clone();
        for t in 12..36 {
            let v = ext[t - 12];
            ext.push(v);
        }
        let out = seasonal_naive_forecast(&series(obs), 24).unwrap();
        assert_eq!(out, ext[12..36].to_vec());
        assert_eq!(out[12..], out[..12]);
    }
}
