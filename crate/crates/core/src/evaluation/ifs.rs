//! Normalized scores and the integrated forecasting score (IFS).

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::stats::{mean, norm_cdf, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

/// Consistency score per model from rows of (Berkowitz, JB, KS) p-values:
/// 0.25 per test passed at `alpha`, plus 0.25 times the mean position of the
/// model's p-values between the worst (0) and best (1) model in each test.
pub fn normalize_consistency(p_values: &[[f64; 3]], alpha: f64) -> Vec<f64> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in p_values {
        for t in 0..3 {
            lo[t] = lo[t].min(row[t]);
            hi[t] = hi[t].max(row[t]);
        }
    }
    p_values
        .iter()
        .map(|row| {
            let passed = row.iter().filter(|p| **p > alpha).count() as f64;
            let position: f64 = (0..3)
                .map(|t| if hi[t] > lo[t] { (row[t] - lo[t]) / (hi[t] - lo[t]) } else { 1.0 })
                .sum::<f64>()
                / 3.0;
            0.25 * passed + 0.25 * position
        })
        .collect()
}

/// Quantile position of each value under a normal fitted across models
/// (sample standard deviation).
pub fn normalize_gaussian(values: &[f64], orientation: Orientation) -> Vec<f64> {
    let m = mean(values);
    let s = if values.len() > 1 { sample_variance(values).sqrt() } else { 0.0 };
    values
        .iter()
        .map(|x| {
            if !(s > 0.0) {
                return 0.5;
            }
            match orientation {
                Orientation::HigherBetter => norm_cdf((x - m) / s),
                Orientation::LowerBetter => norm_cdf((m - x) / s),
            }
        })
        .collect()
}

pub fn ifs(consistency: f64, accuracy: f64, errors: f64) -> f64 {
    (consistency + accuracy + errors) / 3.0
}

/// Rank 1 for the highest value; ties share the best rank.
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values.iter().map(|v| 1 + values.iter().filter(|w| *w > v).count()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsInputs {
    pub model: String,
    pub berkowitz_p: f64,
    pub jb_p: f64,
    pub ks_p: f64,
    /// Entire-sample log-likelihood (absolute or in excess of a benchmark).
    pub loglik: f64,
    /// Entire-sample CRPS (absolute or in excess of a benchmark).
    pub crps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsRow {
    pub model: String,
    pub ifs: f64,
    pub consistency: f64,
    pub accuracy: f64,
    pub errors: f64,
    pub ifs_rank: usize,
    pub consistency_rank: usize,
    pub accuracy_rank: usize,
    pub errors_rank: usize,
}

/// Normalized scores, IFS and ranks for every model, in input order.
pub fn score_table(inputs: &[IfsInputs], alpha: f64) -> Result<Vec<IfsRow>, EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::TooFewModels { got: 0, required: 1 });
    }
    let finite = inputs.iter().all(|r| {
        [r.berkowitz_p, r.jb_p, r.ks_p, r.loglik, r.crps].iter().all(|v| v.is_finite())
    });
    if !finite {
        return Err(EvalError::NonFinite);
    }
    // sums run in model-name order so that row order cannot move the last bit
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| inputs[a].model.cmp(&inputs[b].model));
    let sorted: Vec<&IfsInputs> = order.iter().map(|&i| &inputs[i]).collect();
    let p: Vec<[f64; 3]> = sorted.iter().map(|r| [r.berkowitz_p, r.jb_p, r.ks_p]).collect();
    let consistency = normalize_consistency(&p, alpha);
    let accuracy = normalize_gaussian(&sorted.iter().map(|r| r.loglik).collect::<Vec<_>>(), Orientation::HigherBetter);
    let errors = normalize_gaussian(&sorted.iter().map(|r| r.crps).collect::<Vec<_>>(), Orientation::LowerBetter);
    let total: Vec<f64> = (0..inputs.len()).map(|i| ifs(consistency[i], accuracy[i], errors[i])).collect();
    let (rc, ra, re, ri) = (
        competition_ranks(&consistency),
        competition_ranks(&accuracy),
        competition_ranks(&errors),
        competition_ranks(&total),
    );
    let mut rows: Vec<(usize, IfsRow)> = sorted
        .iter()
        .enumerate()
        .map(|(i, r)| (order[i], IfsRow {
            model: r.model.clone(),
            ifs: total[i],
            consistency: consistency[i],
            accuracy: accuracy[i],
            errors: errors[i],
            ifs_rank: ri[i],
            consistency_rank: rc[i],
            accuracy_rank: ra[i],
            errors_rank: re[i],
        }))
        .collect();
    rows.sort_by_key(|(i, _)| *i);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}
