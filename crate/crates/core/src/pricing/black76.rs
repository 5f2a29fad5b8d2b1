use serde::{Deserialize, Serialize};

use super::PricingError;
use crate::stats::norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

/// Black-76 price of a European option on a futures contract.
///
/// `r` is the continuously compounded discount rate over `tau`.
/// With `sigma == 0` the discounted intrinsic value is returned.
pub fn black76_price(f: f64, k: f64, r: f64, tau: f64, sigma: f64, kind: OptionKind) -> f64 {
    let df = (-r * tau).exp();
    let intrinsic = match kind {
        OptionKind::Call => (f - k).max(0.0),
        OptionKind::Put => (k - f).max(0.0),
    };
    if k <= 0.0 {
        return match kind {
            OptionKind::Call => df * f,
            OptionKind::Put => 0.0,
        };
    }
    let sd = sigma * tau.sqrt();
    if sd <= 0.0 || f <= 0.0 {
        return df * intrinsic;
    }
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => df * (f * norm_cdf(d1) - k * norm_cdf(d2)),
        OptionKind::Put => df * (k * norm_cdf(-d2) - f * norm_cdf(-d1)),
    }
}

pub const IV_LOWER: f64 = 1e-6;
pub const IV_UPPER: f64 = 5.0;

/// Implied Black-76 volatility by bracketed bisection on `[1e-6, 5]`.
///
/// Prices at or just above the discounted intrinsic value return the lower
/// bracket rather than diverging.
pub fn black76_implied_vol(price: f64, f: f64, k: f64, r: f64, tau: f64, kind: OptionKind) -> Result<f64, PricingError> {
    let df = (-r * tau).exp();
    let (lower, upper) = match kind {
        OptionKind::Call => (df * (f - k).max(0.0), df * f),
        OptionKind::Put => (df * (k - f).max(0.0), df * k),
    };
    if !price.is_finite() || price < lower {
        return Err(PricingError::PriceBound { price, bound: lower, side: "discounted intrinsic (lower)" });
    }
    if price >= upper {
        return Err(PricingError::PriceBound { price, bound: upper, side: "discounted upper bound" });
    }
    let p_lo = black76_price(f, k, r, tau, IV_LOWER, kind);
    if price <= p_lo {
        return Ok(IV_LOWER);
    }
    let p_hi = black76_price(f, k, r, tau, IV_UPPER, kind);
    if price > p_hi {
        return Err(PricingError::PriceBound { price, bound: p_hi, side: "price at the upper volatility bracket" });
    }
    let (mut lo, mut hi) = (IV_LOWER, IV_UPPER);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = black76_price(f, k, r, tau, mid, kind);
        if p == price || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if p > price {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
