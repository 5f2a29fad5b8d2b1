//! Option-implied (risk-neutral) schemes: lognormal at the ATM vol, Heston,
//! Bates and Variance Gamma calibrated by relative pricing error, and the
//! spline-smoothed Breeden-Litzenberger density.

pub mod malz;
pub mod sre;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use malz::{malz_rnd, MalzInfo, VolCurve, MALZ_STEP};
pub use sre::{calibrate_sre, sre_objective, SreFit, SreModel, SreOptions};

use crate::density::{ForecastDensity, LogReturnGrid};
use crate::marketdata::CrossSection;
use crate::pricing::{black76_implied_vol, cf_cdf_on_grid, CharacteristicFunction, Dynamics, OptionKind, PricingError};
use crate::stats::{norm_cdf, norm_pdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RndError {
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("need at least {required} quotes, got {got}")]
    TooFewQuotes { got: usize, required: usize },
    #[error("implied volatility failed at strike {strike}: {source}")]
    ImpliedVol { strike: f64, source: PricingError },
    #[error("spline knots must have strictly increasing strikes and positive vols")]
    BadKnots,
    #[error("every calibration start evaluated to an infinite objective")]
    NoFeasibleStart,
}

/// Implied vol at each quote of the cross-section.
pub fn implied_vols(cs: &CrossSection) -> Result<Vec<f64>, RndError> {
    let (r, tau) = (cs.cont_rate(), cs.tau());
    cs.quotes
        .iter()
        .map(|q| {
            black76_implied_vol(q.mid, cs.futures, q.strike, r, tau, OptionKind::Call)
                .map_err(|e| RndError::ImpliedVol { strike: q.strike, source: e })
        })
        .collect()
}

/// ATM vol by linear interpolation between the two strikes bracketing the
/// futures price (nearest quote when the futures lies outside the strikes).
pub fn atm_vol(cs: &CrossSection) -> Result<f64, RndError> {
    let n = cs.quotes.len();
    if n < 2 {
        return Err(RndError::TooFewQuotes { got: n, required: 2 });
    }
    let f = cs.futures;
    let (r, tau) = (cs.cont_rate(), cs.tau());
    let iv = |i: usize| {
        let q = &cs.quotes[i];
        black76_implied_vol(q.mid, f, q.strike, r, tau, OptionKind::Call)
            .map_err(|e| RndError::ImpliedVol { strike: q.strike, source: e })
    };
    let hi = cs.quotes.partition_point(|q| q.strike < f);
    if hi < n && cs.quotes[hi].strike == f {
        return iv(hi);
    }
    if hi == 0 {
        return iv(0);
    }
    if hi == n {
        return iv(n - 1);
    }
    let (k0, k1) = (cs.quotes[hi - 1].strike, cs.quotes[hi].strike);
    let (v0, v1) = (iv(hi - 1)?, iv(hi)?);
    Ok(v0 + (f - k0) / (k1 - k0) * (v1 - v0))
}

/// Lognormal risk-neutral density with mean `f` and volatility `sigma`
/// over `tau` years, with analytic CDF and pdf.
pub fn lognormal_rnd(f: f64, sigma: f64, tau: f64, grid: &LogReturnGrid) -> ForecastDensity {
    let sd = sigma * tau.sqrt();
    let m = -0.5 * sd * sd;
    let ys = grid.points();
    let cdf: Vec<f64> = ys.iter().map(|y| norm_cdf((y - m) / sd)).collect();
    let pdf: Vec<f64> = ys.iter().map(|y| norm_pdf((y - m) / sd) / sd).collect();
    ForecastDensity::from_parts(*grid, &cdf, pdf, f)
}

/// Density from a model CF by Fourier inversion on the grid, isotonic
/// repair and central-difference pdf.
pub fn rnd_from_cf(dynamics: Dynamics, f: f64, tau: f64, grid: &LogReturnGrid) -> Result<ForecastDensity, RndError> {
    let cf = CharacteristicFunction::new(dynamics, f, tau)?;
    let (raw, _) = cf_cdf_on_grid(&cf, grid)?;
    Ok(ForecastDensity::from_cdf(*grid, &raw, f))
}

/// Identifies the scheme that produced a risk-neutral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RndScheme {
    LnAtm,
    Heston,
    Bates,
    Vg,
    Malz,
}
