//! Historical schemes: lognormal, bootstrap, GARCH-N, GARCH-t and GJR with
//! filtered historical simulation, calibrated on trailing daily log-returns
//! and simulated to the horizon.

pub mod garch;
pub mod paths;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use garch::{calibrate_garch, estimate_t_dof, garch_filter, GarchFit, GarchParams, GarchVariant};
pub use paths::{empirical_density, simulate_paths, Innovations, PathModel, PathSet, MIN_PATHS};

use crate::marketdata::PriceHistory;
use crate::stats::{mean, mix_seed, sample_variance};

pub const MIN_WINDOW: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistError {
    #[error("window has {got} returns, at least {required} required")]
    ShortWindow { got: usize, required: usize },
    #[error("window contains a non-finite return")]
    NonFinite,
    #[error("degenerate window: zero return variance")]
    DegenerateWindow,
    #[error("GARCH optimizer did not converge after {evals} evaluations (best log-likelihood {})", best.loglik)]
    NonConvergence { evals: usize, best: Box<GarchFit> },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{got} paths supplied, at least {required} required")]
    TooFewPaths { got: usize, required: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowLabel {
    #[serde(rename = "6m")]
    SixMonths,
    #[serde(rename = "5y")]
    FiveYears,
}

impl WindowLabel {
    /// Business days in the window.
    pub fn days(self) -> usize {
        match self {
            WindowLabel::SixMonths => 126,
            WindowLabel::FiveYears => 1260,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            WindowLabel::SixMonths => "6m",
            WindowLabel::FiveYears => "5y",
        }
    }
}

/// Trailing daily log-returns ending on (and including) the observation date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnWindow {
    returns: Vec<f64>,
    pub label: WindowLabel,
    pub end_date: NaiveDate,
}

impl ReturnWindow {
    pub fn new(returns: Vec<f64>, label: WindowLabel, end_date: NaiveDate) -> Result<Self, HistError> {
        if returns.len() < MIN_WINDOW {
            return Err(HistError::ShortWindow { got: returns.len(), required: MIN_WINDOW });
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(HistError::NonFinite);
        }
        Ok(Self { returns, label, end_date })
    }

    /// Slice the last `label.days()` returns dated on or before `end_date`.
    pub fn from_history(history: &PriceHistory, end_date: NaiveDate, label: WindowLabel) -> Result<Self, HistError> {
        Self::from_history_len(history, end_date, label, label.days())
    }

    /// As `from_history` with an explicit window length.
    pub fn from_history_len(
        history: &PriceHistory,
        end_date: NaiveDate,
        label: WindowLabel,
        days: usize,
    ) -> Result<Self, HistError> {
        let available = history.bars().partition_point(|b| b.date <= end_date).saturating_sub(1);
        let returns =
            history.returns_until(end_date, days).ok_or(HistError::ShortWindow { got: available, required: days })?;
        Self::new(returns, label, end_date)
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.returns)
    }

    /// Sample variance, or `None` when it is zero up to rounding.
    pub fn variance(&self) -> Option<f64> {
        let var = sample_variance(&self.returns);
        let m = self.mean();
        if var > 1e-20 * m * m && var > 0.0 {
            Some(var)
        } else {
            None
        }
    }

    pub fn demeaned(&self) -> Vec<f64> {
        let m = self.mean();
        self.returns.iter().map(|r| r - m).collect()
    }
}

/// Daily mean and standard deviation (N-1) of the window's log-returns.
pub fn calibrate_lognormal_hist(window: &ReturnWindow) -> Result<(f64, f64), HistError> {
    let var = window.variance().ok_or(HistError::DegenerateWindow)?;
    Ok((window.mean(), var.sqrt()))
}

/// `n` daily returns `mu + z` with `z` resampled from the demeaned window.
pub fn bootstrap_draw(window: &ReturnWindow, mu: f64, n: usize, seed: u64) -> Vec<f64> {
    let pool = window.demeaned();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0xB007]));
    (0..n).map(|_| mu + pool[rng.random_range(0..pool.len())]).collect()
}
