//! Density forecast verification: PIT sequences and their tests, log score,
//! return-based CRPS, and the normalized scores combined into the IFS.

pub mod ifs;
pub mod scoring;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ifs::{competition_ranks, ifs, normalize_consistency, normalize_gaussian, score_table, IfsInputs, IfsRow, Orientation};
pub use scoring::{crps_on_grid, crps_rb, log_density, log_score, mean_crps, LOG_FLOOR};
pub use tests::{berkowitz_lr3, jarque_bera, ks_normal, TestResult};

use crate::density::ForecastDensity;
use crate::stats::{kurtosis, mean, norm_inv, quantile_sorted, sample_variance, skewness};

pub const PIT_CLAMP: f64 = 1e-6;
pub const MIN_TEST_LENGTH: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sequence has {got} values, at least {required} required")]
    TooShort { got: usize, required: usize },
    #[error("degenerate (constant) sequence")]
    Degenerate,
    #[error("non-finite value in sequence")]
    NonFinite,
    #[error("length mismatch: {0} densities vs {1} realizations")]
    LengthMismatch(usize, usize),
    #[error("at least {required} models needed, got {got}")]
    TooFewModels { got: usize, required: usize },
}

/// PIT of a realized horizon price under the forecast, clamped to
/// `[PIT_CLAMP, 1 - PIT_CLAMP]`.
pub fn pit(density: &ForecastDensity, realization: f64) -> f64 {
    let y = (realization / density.anchor).ln();
    let p = if y.is_nan() { 0.0 } else { density.cdf_at(y) };
    p.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PitSequence {
    pub dates: Vec<NaiveDate>,
    pub pits: Vec<f64>,
    pub tpits: Vec<f64>,
}

impl PitSequence {
    pub fn push(&mut self, date: NaiveDate, pit: f64) {
        let p = pit.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
        self.dates.push(date);
        self.pits.push(p);
        self.tpits.push(norm_inv(p));
    }

    pub fn from_pits(dates: Vec<NaiveDate>, pits: &[f64]) -> Self {
        let mut s = Self::default();
        for (d, p) in dates.into_iter().zip(pits) {
            s.push(d, *p);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.pits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pits.is_empty()
    }

    /// Counts of PITs in `bins` equal-width bins over [0, 1].
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        for p in &self.pits {
            let b = ((p * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        counts
    }
}

/// Descriptive statistics of a T-PIT sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpitSummary {
    pub mean: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub ar1: f64,
}

pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let den: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if xs.len() < 2 || den == 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

pub fn tpit_summary(tpits: &[f64]) -> TpitSummary {
    let mut sorted = tpits.to_vec();
    sorted.sort_by(f64::total_cmp);
    TpitSummary {
        mean: mean(tpits),
        p05: quantile_sorted(&sorted, 0.05),
        median: quantile_sorted(&sorted, 0.5),
        p95: quantile_sorted(&sorted, 0.95),
        std: sample_variance(tpits).sqrt(),
        skewness: skewness(tpits),
        kurtosis: kurtosis(tpits),
        ar1: lag1_autocorrelation(tpits),
    }
}
