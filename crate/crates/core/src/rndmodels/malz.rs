//! Breeden-Litzenberger density from a cubic-spline implied-vol curve.

use serde::{Deserialize, Serialize};

use super::{implied_vols, RndError};
use crate::density::{ForecastDensity, LogReturnGrid};
use crate::marketdata::CrossSection;
use crate::pricing::{black76_price, OptionKind};
use crate::stats::norm_cdf;

/// Finite-difference step as a fraction of the futures price.
pub const MALZ_STEP: f64 = 0.01;
const MESH_LO: f64 = 0.3;
const MESH_HI: f64 = 3.0;
const VOL_FLOOR: f64 = 1e-4;

/// Natural cubic spline through (strike, vol) knots, flat outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolCurve {
    strikes: Vec<f64>,
    vols: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl VolCurve {
    pub fn new(strikes: Vec<f64>, vols: Vec<f64>) -> Result<Self, RndError> {
        let n = strikes.len();
        if n < 2 || vols.len() != n {
            return Err(RndError::BadKnots);
        }
        if strikes.windows(2).any(|w| !(w[1] > w[0])) || vols.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(RndError::BadKnots);
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal solve for interior second derivatives
            let h: Vec<f64> = strikes.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((vols[i + 2] - vols[i + 1]) / h[i + 1] - (vols[i + 1] - vols[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { strikes, vols, m })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.strikes.iter().copied().zip(self.vols.iter().copied())
    }

    pub fn eval(&self, k: f64) -> f64 {
        let n = self.strikes.len();
        if k <= self.strikes[0] {
            return self.vols[0];
        }
        if k >= self.strikes[n - 1] {
            return self.vols[n - 1];
        }
        let i = self.strikes.partition_point(|s| *s <= k) - 1;
        let (x0, x1) = (self.strikes[i], self.strikes[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - k) / h, (k - x0) / h);
        let v = a * self.vols[i]
            + b * self.vols[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0;
        v.max(VOL_FLOOR)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalzInfo {
    /// Finite-difference step in price units (0.01 F).
    pub step: f64,
    /// Total absolute adjustment made by the monotone repair.
    pub repair: f64,
}

/// CDF at horizon price `x`: `1 + (1/D)[B(x + D/2) - B(x - D/2)]` with the
/// undiscounted Black price `B` at the curve vol, inside [0.3F, 3F]; outside
/// it the flat end vol gives a lognormal tail.
pub fn malz_cdf_at(curve: &VolCurve, f: f64, tau: f64, x: f64) -> f64 {
    let step = MALZ_STEP * f;
    if x < MESH_LO * f || x > MESH_HI * f {
        let sd = curve.eval(x) * tau.sqrt();
        return norm_cdf(((x / f).ln() + 0.5 * sd * sd) / sd);
    }
    let b = |k: f64| black76_price(f, k, 0.0, tau, curve.eval(k), OptionKind::Call);
    1.0 + (b(x + 0.5 * step) - b(x - 0.5 * step)) / step
}

/// Risk-neutral density from the cross-section's smoothed implied vols.
pub fn malz_rnd(cs: &CrossSection, grid: &LogReturnGrid) -> Result<(ForecastDensity, MalzInfo), RndError> {
    let vols = implied_vols(cs)?;
    let curve = VolCurve::new(cs.strikes(), vols)?;
    let f = cs.futures;
    let tau = cs.tau();
    let raw: Vec<f64> = grid.points().iter().map(|y| malz_cdf_at(&curve, f, tau, f * y.exp())).collect();
    let density = ForecastDensity::from_cdf(*grid, &raw, f);
    let info = MalzInfo { step: MALZ_STEP * f, repair: density.repair };
    Ok((density, info))
}
