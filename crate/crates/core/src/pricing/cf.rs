//! Characteristic functions of the horizon log-price under the risk-neutral
//! dynamics of each stochastic model.
//!
//! All functions accept a complex frequency so that the same evaluators serve
//! both the CDF inversion (real `w`) and option pricing (shifted contours).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PricingError;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Mean-reversion speed of the variance.
    pub a: f64,
    /// Long-run variance.
    pub vbar: f64,
    /// Volatility of variance.
    pub eta: f64,
    pub rho: f64,
    /// Variance at the observation date.
    pub v0: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<(), PricingError> {
        let all = [self.a, self.vbar, self.eta, self.rho, self.v0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PricingError::InvalidParams("Heston parameters must be finite".into()));
        }
        if self.a < 0.0 || self.eta < 0.0 {
            return Err(PricingError::InvalidParams("Heston needs a >= 0 and eta >= 0".into()));
        }
        if self.vbar <= 0.0 || self.v0 <= 0.0 {
            return Err(PricingError::InvalidParams("Heston variances must be positive".into()));
        }
        if self.rho <= -1.0 || self.rho >= 1.0 {
            return Err(PricingError::InvalidParams("Heston correlation must lie in (-1, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatesParams {
    pub heston: HestonParams,
    /// Jump intensity per year.
    pub lambda: f64,
    /// Mean relative jump size, E[J].
    pub mu_j: f64,
    /// Standard deviation of the log jump size.
    pub nu_j: f64,
}

impl BatesParams {
    pub fn validate(&self) -> Result<(), PricingError> {
        self.heston.validate()?;
        if !(self.lambda.is_finite() && self.mu_j.is_finite() && self.nu_j.is_finite()) {
            return Err(PricingError::InvalidParams("Bates jump parameters must be finite".into()));
        }
        if self.lambda < 0.0 || self.nu_j < 0.0 {
            return Err(PricingError::InvalidParams("Bates needs lambda >= 0 and nu_j >= 0".into()));
        }
        if self.mu_j <= -1.0 {
            return Err(PricingError::InvalidParams("Bates mean jump must exceed -100%".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub sigma: f64,
    pub nu: f64,
    pub theta: f64,
}

impl VgParams {
    /// 1/nu > theta + sigma^2/2, needed for the martingale correction to exist.
    pub fn feasible(&self) -> bool {
        self.sigma > 0.0 && self.nu > 0.0 && 1.0 / self.nu > self.theta + 0.5 * self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        if !(self.sigma.is_finite() && self.nu.is_finite() && self.theta.is_finite()) {
            return Err(PricingError::InvalidParams("VG parameters must be finite".into()));
        }
        if !self.feasible() {
            return Err(PricingError::InvalidParams(
                "VG needs sigma > 0, nu > 0 and 1/nu > theta + sigma^2/2".into(),
            ));
        }
        Ok(())
    }

    /// Drift correction omega that makes the forward a martingale.
    pub fn omega(&self) -> f64 {
        (1.0 - self.theta * self.nu - 0.5 * self.sigma * self.sigma * self.nu).ln() / self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dynamics {
    Lognormal { sigma: f64 },
    Heston(HestonParams),
    Bates(BatesParams),
    Vg(VgParams),
}

impl Dynamics {
    pub fn validate(&self) -> Result<(), PricingError> {
        match self {
            Dynamics::Lognormal { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => {
                Err(PricingError::InvalidParams("lognormal sigma must be finite and >= 0".into()))
            }
            Dynamics::Lognormal { .. } => Ok(()),
            Dynamics::Heston(p) => p.validate(),
            Dynamics::Bates(p) => p.validate(),
            Dynamics::Vg(p) => p.validate(),
        }
    }

    /// E[exp(iu X)] for the horizon log-return X = ln(F_T / F_t).
    pub fn log_return_cf(&self, u: Complex64, tau: f64) -> Complex64 {
        match self {
            Dynamics::Lognormal { sigma } => {
                let v = sigma * sigma * tau;
                (-0.5 * v * (I * u + u * u)).exp()
            }
            Dynamics::Heston(p) => heston_log_return_cf(u, p, tau),
            Dynamics::Bates(p) => heston_log_return_cf(u, &p.heston, tau) * jump_factor(u, p, tau),
            Dynamics::Vg(p) => vg_log_return_cf(u, p, tau),
        }
    }
}

/// Characteristic function of ln F_T for given dynamics, forward and horizon.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicFunction {
    pub dynamics: Dynamics,
    pub forward: f64,
    pub tau: f64,
}

impl CharacteristicFunction {
    pub fn new(dynamics: Dynamics, forward: f64, tau: f64) -> Result<Self, PricingError> {
        dynamics.validate()?;
        if !(forward > 0.0 && tau > 0.0) {
            return Err(PricingError::InvalidParams("forward and tau must be positive".into()));
        }
        Ok(Self { dynamics, forward, tau })
    }

    /// CF of the log-return ln(F_T / F_t).
    pub fn log_return(&self, u: Complex64) -> Complex64 {
        self.dynamics.log_return_cf(u, self.tau)
    }

    /// CF of the log-price ln F_T.
    pub fn log_price(&self, u: Complex64) -> Complex64 {
        (I * u * self.forward.ln()).exp() * self.log_return(u)
    }
}

pub fn cf_heston(w: Complex64, params: &HestonParams, forward: f64, tau: f64) -> Result<Complex64, PricingError> {
    Ok(CharacteristicFunction::new(Dynamics::Heston(*params), forward, tau)?.log_price(w))
}

pub fn cf_bates(w: Complex64, params: &BatesParams, forward: f64, tau: f64) -> Result<Complex64, PricingError> {
    Ok(CharacteristicFunction::new(Dynamics::Bates(*params), forward, tau)?.log_price(w))
}

pub fn cf_vg(w: Complex64, params: &VgParams, forward: f64, tau: f64) -> Result<Complex64, PricingError> {
    Ok(CharacteristicFunction::new(Dynamics::Vg(*params), forward, tau)?.log_price(w))
}

/// ln(1+z)/z, accurate for small |z|.
fn log1p_over(z: Complex64) -> Complex64 {
    if z.norm() < 1e-5 {
        Complex64::new(1.0, 0.0) - z / 2.0 + z * z / 3.0
    } else {
        (Complex64::new(1.0, 0.0) + z).ln() / z
    }
}

/// 1 - exp(-x), accurate for small |x|.
fn one_minus_exp_neg(x: Complex64) -> Complex64 {
    if x.norm() < 1e-5 {
        x - x * x / 2.0 + x * x * x / 6.0
    } else {
        Complex64::new(1.0, 0.0) - (-x).exp()
    }
}

/// Heston CF of the log-return in the branch-cut-free ("little trap") form,
/// rearranged so that nothing is divided by eta^2.
fn heston_log_return_cf(u: Complex64, p: &HestonParams, tau: f64) -> Complex64 {
    let iu_u2 = I * u + u * u;
    if p.eta < 1e-7 {
        // deterministic variance path
        let decay = if p.a * tau < 1e-8 { tau * (1.0 - 0.5 * p.a * tau) } else { -(-p.a * tau).exp_m1() / p.a };
        let integrated = p.vbar * tau + (p.v0 - p.vbar) * decay;
        return (-0.5 * iu_u2 * integrated).exp();
    }
    let beta = p.a - p.rho * p.eta * I * u;
    let d = (beta * beta + p.eta * p.eta * iu_u2).sqrt();
    let bpd = beta + d;
    // (beta - d)/eta^2 without cancellation
    let q = -iu_u2 / bpd;
    let g = p.eta * p.eta * q / bpd;
    let edt = (-d * tau).exp();
    let x = one_minus_exp_neg(d * tau) / (1.0 - g);
    let z = g * x;
    let c = p.a * p.vbar * (q * tau - 2.0 * q / bpd * x * log1p_over(z));
    let dd = q * one_minus_exp_neg(d * tau) / (1.0 - g * edt);
    (c + dd * p.v0).exp()
}

fn jump_factor(u: Complex64, p: &BatesParams, tau: f64) -> Complex64 {
    let m = (1.0 + p.mu_j).ln() - 0.5 * p.nu_j * p.nu_j;
    let jump_cf = (I * u * m - 0.5 * p.nu_j * p.nu_j * u * u).exp();
    (p.lambda * tau * (jump_cf - 1.0) - I * u * p.lambda * p.mu_j * tau).exp()
}

fn vg_log_return_cf(u: Complex64, p: &VgParams, tau: f64) -> Complex64 {
    let base = 1.0 - I * u * p.theta * p.nu + 0.5 * p.sigma * p.sigma * p.nu * u * u;
    (I * u * p.omega() * tau - (tau / p.nu) * base.ln()).exp()
}
