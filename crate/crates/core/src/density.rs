//! Discretized predictive distributions of the horizon price.
//!
//! Every scheme, historical or option-implied, emits its forecast on the same
//! uniform log-return mesh so that PITs, log scores and CRPS values are
//! computed identically for all models.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::isotonic_increasing;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogReturnGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for LogReturnGrid {
    fn default() -> Self {
        Self { lo: -1.5, hi: 1.5, n: 3001 }
    }
}

impl LogReturnGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(hi > lo && n >= 3, "grid needs hi > lo and at least 3 points");
        Self { lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        // lo + i*h, pinned so the last node is exactly hi
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Fractional index of `y` on the mesh (may fall outside `[0, n-1]`).
    pub fn position(&self, y: f64) -> f64 {
        (y - self.lo) / self.step()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("cdf and pdf must have {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("cdf is not non-decreasing at node {0}")]
    NotMonotone(usize),
    #[error("pdf has a negative or non-finite value at node {0}")]
    BadPdf(usize),
    #[error("density leaves too much mass outside the grid: cdf(lo) = {lo:.4}, cdf(hi) = {hi:.4}")]
    Coverage { lo: f64, hi: f64 },
    #[error("pdf integrates to {0:.6}, expected 1 within 1e-3")]
    Normalization(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastDensity {
    pub grid: LogReturnGrid,
    /// CDF of the horizon log-return ln(F_T / anchor) at the grid nodes.
    pub cdf: Vec<f64>,
    /// Density of the horizon log-return at the grid nodes.
    pub pdf: Vec<f64>,
    /// Observation-date futures price the log-returns are measured from.
    pub anchor: f64,
    pub obs_date: Option<NaiveDate>,
    pub expiry: Option<NaiveDate>,
    /// Total absolute adjustment made by clamping and isotonic repair.
    pub repair: f64,
}

impl ForecastDensity {
    /// Build a density from raw CDF values: clamps to [0,1], applies isotonic
    /// repair, and derives the pdf by central differences.
    pub fn from_cdf(grid: LogReturnGrid, raw_cdf: &[f64], anchor: f64) -> Self {
        let (cdf, repair) = repair_cdf(raw_cdf);
        let pdf = pdf_from_cdf(&grid, &cdf);
        Self { grid, cdf, pdf, anchor, obs_date: None, expiry: None, repair }
    }

    /// Build from a CDF and an independently computed pdf (e.g. analytic or
    /// kernel-smoothed).
    pub fn from_parts(grid: LogReturnGrid, raw_cdf: &[f64], pdf: Vec<f64>, anchor: f64) -> Self {
        let (cdf, repair) = repair_cdf(raw_cdf);
        let pdf = pdf.into_iter().map(|p| if p.is_finite() { p.max(0.0) } else { 0.0 }).collect();
        Self { grid, cdf, pdf, anchor, obs_date: None, expiry: None, repair }
    }

    /// A forecast that puts all mass at the grid node closest to `log_return`.
    pub fn point_mass(grid: LogReturnGrid, log_return: f64, anchor: f64) -> Self {
        let j = grid.position(log_return).round().clamp(0.0, (grid.n - 1) as f64) as usize;
        let cdf: Vec<f64> = (0..grid.n).map(|i| if i >= j { 1.0 } else { 0.0 }).collect();
        let mut pdf = vec![0.0; grid.n];
        pdf[j] = 1.0 / grid.step();
        Self { grid, cdf, pdf, anchor, obs_date: None, expiry: None, repair: 0.0 }
    }

    pub fn with_dates(mut self, obs_date: NaiveDate, expiry: NaiveDate) -> Self {
        self.obs_date = Some(obs_date);
        self.expiry = Some(expiry);
        self
    }

    /// CDF at log-return `y` by linear interpolation; 0 below and 1 above the grid.
    pub fn cdf_at(&self, y: f64) -> f64 {
        interp_on_grid(&self.grid, &self.cdf, y, 0.0, 1.0)
    }

    /// Log-return density at `y` by linear interpolation; 0 outside the grid.
    pub fn pdf_at(&self, y: f64) -> f64 {
        interp_on_grid(&self.grid, &self.pdf, y, 0.0, 0.0)
    }

    /// Trapezoidal integral of the pdf over the grid.
    pub fn pdf_mass(&self) -> f64 {
        trapezoid(&self.pdf, self.grid.step())
    }

    /// Mean of the horizon price implied by the pdf.
    pub fn mean_price(&self) -> f64 {
        let h = self.grid.step();
        let integrand: Vec<f64> =
            (0..self.grid.n).map(|i| self.pdf[i] * self.grid.point(i).exp()).collect();
        self.anchor * trapezoid(&integrand, h) / self.pdf_mass()
    }

    /// Log-return quantile by inverting the piecewise-linear CDF.
    pub fn quantile(&self, q: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < q);
        if idx == 0 {
            return self.grid.lo;
        }
        if idx >= self.grid.n {
            return self.grid.hi;
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (y0, y1) = (self.grid.point(idx - 1), self.grid.point(idx));
        if c1 > c0 {
            y0 + (q - c0) / (c1 - c0) * (y1 - y0)
        } else {
            y1
        }
    }

    /// Check the structural invariants every emitted density must satisfy.
    pub fn validate(&self) -> Result<(), DensityError> {
        let n = self.grid.n;
        if self.cdf.len() != n {
            return Err(DensityError::Length { expected: n, got: self.cdf.len() });
        }
        if self.pdf.len() != n {
            return Err(DensityError::Length { expected: n, got: self.pdf.len() });
        }
        for i in 1..n {
            if self.cdf[i] < self.cdf[i - 1] {
                return Err(DensityError::NotMonotone(i));
            }
        }
        if let Some(i) = self.pdf.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(DensityError::BadPdf(i));
        }
        let (lo, hi) = (self.cdf[0], self.cdf[n - 1]);
        if lo >= 0.005 || hi <= 0.995 {
            return Err(DensityError::Coverage { lo, hi });
        }
        let mass = self.pdf_mass();
        if (mass - 1.0).abs() > 1e-3 {
            return Err(DensityError::Normalization(mass));
        }
        Ok(())
    }
}

pub(crate) fn interp_on_grid(grid: &LogReturnGrid, values: &[f64], y: f64, below: f64, above: f64) -> f64 {
    let pos = grid.position(y);
    if pos < 0.0 {
        return below;
    }
    let last = (grid.n - 1) as f64;
    if pos > last {
        return above;
    }
    let i = pos.floor() as usize;
    if i + 1 >= grid.n {
        return values[grid.n - 1];
    }
    let t = pos - i as f64;
    values[i] + t * (values[i + 1] - values[i])
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Clamp to [0,1] then apply isotonic repair. Returns the repaired CDF and
/// the total absolute adjustment.
pub fn repair_cdf(raw: &[f64]) -> (Vec<f64>, f64) {
    let clamped: Vec<f64> = raw
        .iter()
        .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let fitted = isotonic_increasing(&clamped);
    let repair = raw.iter().zip(&fitted).map(|(r, f)| (r - f).abs()).sum();
    (fitted, repair)
}

/// Central-difference pdf of a CDF on the grid (one-sided at the ends).
pub fn pdf_from_cdf(grid: &LogReturnGrid, cdf: &[f64]) -> Vec<f64> {
    let n = cdf.len();
    let h = grid.step();
    (0..n)
        .map(|i| {
            let d = if i == 0 {
                (cdf[1] - cdf[0]) / h
            } else if i + 1 == n {
                (cdf[n - 1] - cdf[n - 2]) / h
            } else {
                (cdf[i + 1] - cdf[i - 1]) / (2.0 * h)
            };
            d.max(0.0)
        })
        .collect()
}
