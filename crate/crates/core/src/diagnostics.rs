//! Post-processing of trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{l2_distance, GridFunction};
use crate::pde::Trajectory;

/// Least-squares line through `(t, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

pub fn fit_log_slope(times: &[f64], values: &[f64]) -> Result<LogFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("cannot take log of {v}")));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in times.iter().zip(&logs) {
        sxy += (t - tm) * (l - lm);
        sxx += (t - tm) * (t - tm);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("times are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LogFit {
        slope,
        intercept: lm - slope * tm,
        points: times.len(),
    })
}

/// `‖y(t) - f‖₂` at every stored time.
pub fn error_history(traj: &Trajectory, f: &GridFunction) -> Result<Vec<f64>> {
    traj.states.iter().map(|y| l2_distance(y, f)).collect()
}

/// Fits `ln ‖y(t) - f‖₂` over the stored times in `[t0, t1]`.
pub fn fitted_decay(traj: &Trajectory, f: &GridFunction, t0: f64, t1: f64) -> Result<LogFit> {
    let errors = error_history(traj, f)?;
    let (times, values): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(errors)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(t, e)| (*t, e))
        .unzip();
    fit_log_slope(&times, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_exact_exponential() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        let fit = fit_log_slope(&t, &v).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3.0f64.ln(), epsilon = 1e-12);
        assert_eq!(fit.points, 20);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_log_slope(&[0.0], &[1.0]).is_err());
        assert!(fit_log_slope(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(fit_log_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_log_slope(&[0.0, 1.0], &[1.0]).is_err());
    }
}
