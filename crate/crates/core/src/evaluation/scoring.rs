//! Scoring rules: log score and the return-based CRPS.

use super::EvalError;
use crate::density::ForecastDensity;

/// Density values below this are floored before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Log of the forecast log-return density at the realized horizon price.
pub fn log_density(density: &ForecastDensity, realization: f64) -> f64 {
    let y = (realization / density.anchor).ln();
    let p = if y.is_finite() { density.pdf_at(y) } else { 0.0 };
    p.max(LOG_FLOOR).ln()
}

/// Sum of log densities over the ensemble.
pub fn log_score(densities: &[ForecastDensity], realizations: &[f64]) -> Result<f64, EvalError> {
    if densities.len() != realizations.len() {
        return Err(EvalError::LengthMismatch(densities.len(), realizations.len()));
    }
    Ok(densities.iter().zip(realizations).map(|(d, x)| log_density(d, *x)).sum())
}

/// `integral (cdf(x) - 1{x >= target})^2 dx` by the trapezoid rule on the
/// node values of the integrand, for a CDF tabulated on increasing nodes
/// `xs`. The CDF is taken as 0 below and 1 above the nodes.
pub fn crps_on_grid(xs: &[f64], cdf: &[f64], target: f64) -> f64 {
    let n = xs.len();
    assert!(n >= 2 && cdf.len() == n, "need matching node and CDF vectors");
    // a target within rounding of a node is that node
    let j = xs.partition_point(|x| *x < target).min(n - 1);
    let target = [j.saturating_sub(1), j]
        .into_iter()
        .find(|&i| (xs[i] - target).abs() <= 1e-9 * (xs[1] - xs[0]).abs())
        .map_or(target, |i| xs[i]);
    let mut total = 0.0;
    if target < xs[0] {
        total += xs[0] - target;
    }
    if target > xs[n - 1] {
        total += target - xs[n - 1];
    }
    let g = |i: usize| {
        let ind = if xs[i] >= target { 1.0 } else { 0.0 };
        (cdf[i] - ind).powi(2)
    };
    for i in 1..n {
        total += 0.5 * (xs[i] - xs[i - 1]) * (g(i - 1) + g(i));
    }
    total
}

/// Per-date return-based CRPS: the square root of the integrated squared
/// CDF difference, measured in simple returns `F / anchor - 1`.
pub fn crps_rb(density: &ForecastDensity, realization: f64) -> f64 {
    let xs: Vec<f64> = density.grid.points().iter().map(|y| y.exp() - 1.0).collect();
    let target = realization / density.anchor - 1.0;
    crps_on_grid(&xs, &density.cdf, target).sqrt()
}

/// Ensemble CRPS: the mean of the per-date values.
pub fn mean_crps(densities: &[ForecastDensity], realizations: &[f64]) -> Result<f64, EvalError> {
    if densities.len() != realizations.len() {
        return Err(EvalError::LengthMismatch(densities.len(), realizations.len()));
    }
    if densities.is_empty() {
        return Err(EvalError::TooShort { got: 0, required: 1 });
    }
    let sum: f64 = densities.iter().zip(realizations).map(|(d, x)| crps_rb(d, *x)).sum();
    Ok(sum / densities.len() as f64)
}
