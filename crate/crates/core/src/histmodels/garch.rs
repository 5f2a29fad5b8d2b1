//! GARCH(1,1) and GJR-GARCH(1,1) by Gaussian quasi-maximum likelihood.
//!
//! The optimizer works on unconstrained coordinates: `omega = exp(p0)`,
//! persistence `alpha + beta + gamma/2 = (1 - 1e-6) * logistic(p1)` and the
//! split of the persistence across the coefficients by a logistic (GARCH) or
//! a softmax (GJR) of the remaining coordinates.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{HistError, ReturnWindow};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats::kurtosis;

const PERSISTENCE_CAP: f64 = 1.0 - 1e-6;
/// Transformed coordinates beyond this magnitude are treated as infeasible,
/// which keeps the simplex bounded on flat ridges.
const COORD_BOUND: f64 = 25.0;
pub const DOF_MIN: f64 = 4.01;
pub const DOF_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GarchVariant {
    Normal,
    StudentT,
    Gjr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    /// Daily mean log-return.
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Leverage coefficient (zero outside GJR).
    pub gamma: f64,
    /// Student's t degrees of freedom (t variant only).
    pub dof: Option<f64>,
    /// Conditional variance that starts the in-sample recursion.
    pub sigma2_0: f64,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta + 0.5 * self.gamma
    }

    pub fn validate(&self) -> Result<(), HistError> {
        let coeffs = [self.omega, self.alpha, self.beta, self.gamma, self.sigma2_0];
        if coeffs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !self.mu.is_finite() {
            return Err(HistError::InvalidParams("GARCH coefficients must be finite and non-negative".into()));
        }
        if self.persistence() >= 1.0 {
            return Err(HistError::InvalidParams("alpha + beta + gamma/2 must be below 1".into()));
        }
        if let Some(d) = self.dof {
            if !(d > 2.0) {
                return Err(HistError::InvalidParams("t degrees of freedom must exceed 2".into()));
            }
        }
        Ok(())
    }

    /// Next-day variance given today's residual and variance.
    pub fn update(&self, resid: f64, var: f64) -> f64 {
        let lev = if resid < 0.0 { self.gamma } else { 0.0 };
        self.omega + (self.alpha + lev) * resid * resid + self.beta * var
    }
}

/// Run the variance recursion through `returns`. Returns the conditional
/// variances (one per return, plus the next-day forecast last) and the
/// Gaussian log-likelihood.
pub fn garch_filter(returns: &[f64], p: &GarchParams) -> (Vec<f64>, f64) {
    let mut vars = Vec::with_capacity(returns.len() + 1);
    let mut var = p.sigma2_0;
    let mut ll = 0.0;
    let c = (2.0 * PI).ln();
    for &r in returns {
        vars.push(var);
        let e = r - p.mu;
        ll -= 0.5 * (c + var.ln() + e * e / var);
        var = p.update(e, var);
    }
    vars.push(var);
    (vars, ll)
}

fn neg_loglik_per_obs(returns: &[f64], p: &GarchParams) -> f64 {
    let mut var = p.sigma2_0;
    let mut acc = 0.0;
    for &r in returns {
        if !(var > 0.0) {
            return f64::INFINITY;
        }
        let e = r - p.mu;
        acc += var.ln() + e * e / var;
        var = p.update(e, var);
    }
    0.5 * acc / returns.len() as f64
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn decode(x: &[f64], variant: GarchVariant, mu: f64, sigma2_0: f64) -> GarchParams {
    let omega = x[0].exp();
    let pers = PERSISTENCE_CAP * logistic(x[1]);
    let (alpha, beta, gamma) = match variant {
        GarchVariant::Gjr => {
            let m = x[2].max(x[3]).max(0.0);
            let (ea, eb, eg) = ((x[2] - m).exp(), (x[3] - m).exp(), (-m).exp());
            let s = ea + eb + eg;
            (pers * ea / s, pers * eb / s, 2.0 * pers * eg / s)
        }
        _ => {
            let share = logistic(x[2]);
            (pers * share, pers * (1.0 - share), 0.0)
        }
    };
    GarchParams { mu, omega, alpha, beta, gamma, dof: None, sigma2_0 }
}

fn encode(omega: f64, alpha: f64, beta: f64, gamma: f64, variant: GarchVariant) -> Vec<f64> {
    let pers = alpha + beta + 0.5 * gamma;
    let mut x = vec![omega.ln(), logit(pers / PERSISTENCE_CAP)];
    match variant {
        GarchVariant::Gjr => {
            let g = 0.5 * gamma;
            x.push((alpha / g).ln());
            x.push((beta / g).ln());
        }
        _ => x.push(logit(alpha / (alpha + beta))),
    }
    x
}

/// Starting (alpha, beta, gamma) triples around typical equity estimates.
fn starts(variant: GarchVariant) -> [(f64, f64, f64); 5] {
    match variant {
        GarchVariant::Gjr => [
            (0.03, 0.90, 0.08),
            (0.06, 0.85, 0.10),
            (0.01, 0.95, 0.05),
            (0.08, 0.70, 0.12),
            (0.03, 0.55, 0.04),
        ],
        _ => [(0.05, 0.90, 0.0), (0.10, 0.85, 0.0), (0.03, 0.95, 0.0), (0.15, 0.70, 0.0), (0.05, 0.50, 0.0)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub variant: GarchVariant,
    pub params: GarchParams,
    pub loglik: f64,
    pub converged: bool,
    pub evals: usize,
    /// In-sample residuals divided by their conditional volatility.
    pub scaled_residuals: Vec<f64>,
    /// One-step-ahead variance after the last in-sample return.
    pub next_variance: f64,
}

/// Gaussian QMLE of GARCH(1,1) (N and t variants) or GJR-GARCH(1,1).
///
/// `mu` is fixed at the window mean and the recursion starts at the sample
/// variance. The t variant shares the Gaussian estimates and adds degrees of
/// freedom matched to the residual kurtosis.
pub fn calibrate_garch(window: &ReturnWindow, variant: GarchVariant) -> Result<GarchFit, HistError> {
    let r = window.returns();
    let var = window.variance().ok_or(HistError::DegenerateWindow)?;
    let mu = window.mean();
    let dim = if variant == GarchVariant::Gjr { 4 } else { 3 };
    let objective = |x: &[f64]| {
        if x.iter().any(|v| v.abs() > COORD_BOUND) || x[0] > var.ln() + 5.0 {
            return f64::INFINITY;
        }
        neg_loglik_per_obs(r, &decode(x, variant, mu, var))
    };
    let opts = NelderMeadOptions { max_evals: 4000, f_tol: 1e-11, x_tol: 1e-5, step: 0.5, restarts: 3 };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut evals = 0;
    let mut any_converged = false;
    for (a, b, g) in starts(variant) {
        let omega = var * (1.0 - a - b - 0.5 * g);
        let x0 = encode(omega, a, b, g, variant);
        debug_assert_eq!(x0.len(), dim);
        let m = nelder_mead(objective, &x0, &opts);
        evals += m.evals;
        any_converged |= m.converged;
        if best.as_ref().is_none_or(|(_, v, _)| m.value < *v) {
            best = Some((m.x, m.value, m.converged));
        }
    }
    let (x, _, best_converged) = best.expect("at least one start");
    let mut params = decode(&x, variant, mu, var);
    let (vars, loglik) = garch_filter(r, &params);
    let scaled_residuals: Vec<f64> = r.iter().zip(&vars).map(|(ri, v)| (ri - mu) / v.sqrt()).collect();
    if variant == GarchVariant::StudentT {
        params.dof = Some(estimate_t_dof(&scaled_residuals));
    }
    let fit = GarchFit {
        variant,
        params,
        loglik,
        converged: best_converged,
        evals,
        scaled_residuals,
        next_variance: vars[vars.len() - 1],
    };
    if !any_converged {
        return Err(HistError::NonConvergence { evals, best: Box::new(fit) });
    }
    Ok(fit)
}

/// Degrees of freedom matched to the residual excess kurtosis, 6/kappa + 4,
/// clamped to [4.01, 100].
pub fn estimate_t_dof(scaled_residuals: &[f64]) -> f64 {
    dof_from_excess_kurtosis(kurtosis(scaled_residuals) - 3.0)
}

pub fn dof_from_excess_kurtosis(kappa: f64) -> f64 {
    if !(kappa > 0.0) {
        return DOF_MAX;
    }
    (6.0 / kappa + 4.0).clamp(DOF_MIN, DOF_MAX)
}
