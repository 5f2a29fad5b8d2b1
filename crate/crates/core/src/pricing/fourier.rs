//! Fourier inversion of characteristic functions.
//!
//! The CDF uses the Gil-Pelaez inversion
//! `P(X <= y) = 1/2 - (1/pi) int_0^inf Im[e^{-iwy} phi(w)] / w dw`
//! and call prices use the single-integral representation with the contour
//! shifted to Im(u) = -1/2, whose integrand decays like |phi| / w^2.
//! Integration runs on adaptive Gauss-Kronrod panels over `[0, w_max]`, with
//! `w_max` the first frequency where the integrand envelope drops below the
//! truncation threshold, capped at `W_CAP`.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::cf::{CharacteristicFunction, Dynamics};
use super::PricingError;
use crate::density::LogReturnGrid;
use crate::quadrature::{integrate_vec, QuadOptions, WG, WGK, XGK};

pub const W_CAP: f64 = 2000.0;
/// Truncation threshold on |phi(w)/w| for the CDF integrand.
pub const CDF_TAIL: f64 = 1e-10;
/// Truncation threshold on |phi(w - i/2)| / (w^2 + 1/4) for call prices.
pub const CALL_TAIL: f64 = 1e-12;
/// |phi(W_CAP)| above this means the CF has not decayed at all (near-atomic
/// distribution) and the inversion is reported as non-convergent.
pub const TAIL_FAILURE: f64 = 0.5;

/// Diagnostics from one inversion.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InversionInfo {
    pub w_max: f64,
    /// |phi| at the truncation point; bounds the neglected oscillatory tail.
    pub tail_modulus: f64,
    pub quad_error: f64,
}

/// First frequency where `envelope` falls below `threshold`, searched by
/// doubling then bisection, capped at `W_CAP`.
fn truncation_point<F: Fn(f64) -> f64>(envelope: F, threshold: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while envelope(hi) >= threshold {
        lo = hi;
        hi *= 2.0;
        if hi >= W_CAP {
            if envelope(W_CAP) >= threshold {
                return W_CAP;
            }
            hi = W_CAP;
            break;
        }
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if envelope(mid) >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 0.5 {
            break;
        }
    }
    hi
}

/// Initial panel breaks: geometric near the origin, then uniform panels no
/// wider than `max_width`.
fn panel_breaks(w_max: f64, max_width: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    let mut w: f64 = 0.25;
    while w < w_max.min(max_width) {
        breaks.push(w);
        w *= 2.0;
    }
    let start = *breaks.last().unwrap();
    let n = ((w_max - start) / max_width).ceil().max(1.0) as usize;
    for i in 1..=n {
        breaks.push(start + (w_max - start) * i as f64 / n as f64);
    }
    breaks
}

fn cdf_core(cf: &CharacteristicFunction, ys: &[f64], uniform_step: Option<f64>) -> Result<(Vec<f64>, InversionInfo), PricingError> {
    let phi = |w: f64| cf.log_return(Complex64::new(w, 0.0));
    let w_max = truncation_point(|w| phi(w).norm() / w, CDF_TAIL);
    let tail_modulus = phi(w_max).norm();
    if w_max >= W_CAP && tail_modulus > TAIL_FAILURE {
        return Err(PricingError::Quadrature { achieved: tail_modulus, tolerance: CDF_TAIL * W_CAP });
    }
    let y_abs = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let width = (PI / (y_abs + 0.5)).clamp(0.5, 8.0);
    let breaks = panel_breaks(w_max, width);
    let opts = QuadOptions { abs_tol: 1e-9, max_panels: 6000 };
    let n = ys.len();
    let (integrals, err) = integrate_vec(
        |w, out| {
            let v = phi(w);
            match uniform_step {
                Some(h) => {
                    let mut rot = Complex64::from_polar(1.0, -w * ys[0]) * v;
                    let step = Complex64::from_polar(1.0, -w * h);
                    for o in out.iter_mut() {
                        *o = rot.im / w;
                        rot *= step;
                    }
                }
                None => {
                    for (o, y) in out.iter_mut().zip(ys) {
                        *o = (Complex64::from_polar(1.0, -w * y) * v).im / w;
                    }
                }
            }
        },
        &breaks,
        n,
        &opts,
    )
    .map_err(|e| PricingError::Quadrature { achieved: e.achieved, tolerance: e.tolerance })?;
    let cdf = integrals.iter().map(|v| 0.5 - v / PI).collect();
    Ok((cdf, InversionInfo { w_max, tail_modulus, quad_error: err }))
}

/// CDF of F_T at price `x`, clamped to [0, 1].
pub fn cf_to_cdf(cf: &CharacteristicFunction, x: f64) -> Result<f64, PricingError> {
    if !(x > 0.0) {
        return Err(PricingError::InvalidParams("cdf point must be positive".into()));
    }
    let y = (x / cf.forward).ln();
    let (v, _) = cdf_core(cf, &[y], None)?;
    Ok(v[0].clamp(0.0, 1.0))
}

/// Unrepaired CDF of the log-return on every node of `grid` (values may
/// stray outside [0,1] by the quadrature error).
pub fn cf_cdf_on_grid(cf: &CharacteristicFunction, grid: &LogReturnGrid) -> Result<(Vec<f64>, InversionInfo), PricingError> {
    let ys = grid.points();
    cdf_core(cf, &ys, Some(grid.step()))
}

/// Undiscounted call prices for several strikes from one CF.
fn forward_call_values(cf: &CharacteristicFunction, strikes: &[f64]) -> Result<Vec<f64>, PricingError> {
    let f = cf.forward;
    let shift = Complex64::new(0.0, -0.5);
    let phi = |w: f64| cf.log_return(Complex64::new(w, 0.0) + shift);
    let w_max = truncation_point(|w| phi(w).norm() / (w * w + 0.25), CALL_TAIL);
    let ks: Vec<f64> = strikes.iter().map(|k| (f / k).ln()).collect();
    let k_abs = ks.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let width = (PI / (k_abs + 0.25)).clamp(0.05, 8.0);
    let breaks = panel_breaks(w_max, width);
    let opts = QuadOptions { abs_tol: 1e-11, max_panels: 6000 };
    let (integrals, _) = integrate_vec(
        |w, out| {
            let v = phi(w) / (w * w + 0.25);
            for (o, k) in out.iter_mut().zip(&ks) {
                *o = (Complex64::from_polar(1.0, w * k) * v).re;
            }
        },
        &breaks,
        ks.len(),
        &opts,
    )
    .map_err(|e| PricingError::Quadrature { achieved: e.achieved, tolerance: e.tolerance })?;
    Ok(strikes
        .iter()
        .zip(&integrals)
        .map(|(k, i)| (f - (f * k).sqrt() / PI * i).max((f - k).max(0.0)))
        .collect())
}

/// European call price on the futures from the model CF.
///
/// `r` is the continuously compounded rate over `tau` (the CF carries its own
/// horizon; `tau` here only discounts).
pub fn cf_call_price(cf: &CharacteristicFunction, k: f64, r: f64, tau: f64) -> Result<f64, PricingError> {
    let df = (-r * tau).exp();
    if k <= 0.0 {
        return Ok(df * cf.forward);
    }
    Ok(df * forward_call_values(cf, &[k])?[0])
}

/// Call prices for a strike vector sharing one CF evaluation per node.
pub fn cf_call_prices(cf: &CharacteristicFunction, strikes: &[f64], r: f64, tau: f64) -> Result<Vec<f64>, PricingError> {
    let df = (-r * tau).exp();
    if strikes.iter().any(|k| !(*k > 0.0)) {
        return Err(PricingError::InvalidParams("strikes must be positive".into()));
    }
    Ok(forward_call_values(cf, strikes)?.into_iter().map(|c| df * c).collect())
}

/// Call pricer for a fixed strike set, reused across many parameter sets.
///
/// The phase factors `e^{iwk}` are tabulated once on uniform Gauss-Kronrod
/// panels covering `[0, W_CAP]`; each pricing then costs one CF evaluation
/// per node up to the truncation point. When the Kronrod/Gauss discrepancy
/// exceeds the tolerance the adaptive integrator is used instead.
#[derive(Debug, Clone)]
pub struct CallPricer {
    forward: f64,
    strikes: Vec<f64>,
    discount: f64,
    tau: f64,
    /// Upper end of each panel.
    panel_ends: Vec<f64>,
    nodes: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    phases: Vec<Complex64>,
}

const PRICER_TOL: f64 = 1e-10;

impl CallPricer {
    pub fn new(forward: f64, strikes: &[f64], r: f64, tau: f64) -> Result<Self, PricingError> {
        if !(forward > 0.0) || strikes.iter().any(|k| !(*k > 0.0)) {
            return Err(PricingError::InvalidParams("forward and strikes must be positive".into()));
        }
        let ks: Vec<f64> = strikes.iter().map(|k| (forward / k).ln()).collect();
        let k_abs = ks.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let width = (PI / (k_abs + 0.25)).clamp(0.05, 4.0);
        // fine panels resolve the 1/(w^2 + 1/4) peak at the origin
        let mut breaks: Vec<f64> = (0..16).map(|i| 0.25 * i as f64).collect();
        let tail = ((W_CAP - 4.0) / width).ceil() as usize;
        breaks.extend((0..=tail).map(|i| 4.0 + (W_CAP - 4.0) * i as f64 / tail as f64));
        let n_panels = breaks.len() - 1;
        let mut nodes = Vec::with_capacity(15 * n_panels);
        let mut kronrod = Vec::with_capacity(15 * n_panels);
        let mut gauss = Vec::with_capacity(15 * n_panels);
        for pair in breaks.windows(2) {
            let (c, h) = (0.5 * (pair[0] + pair[1]), 0.5 * (pair[1] - pair[0]));
            for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
                let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
                let signs: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
                for &sgn in signs {
                    nodes.push(c + sgn * h * x);
                    kronrod.push(wk * h);
                    gauss.push(wg * h);
                }
            }
        }
        let phases = nodes
            .iter()
            .flat_map(|&w| ks.iter().map(move |k| Complex64::from_polar(1.0, w * k)))
            .collect();
        Ok(Self {
            forward,
            strikes: strikes.to_vec(),
            discount: (-r * tau).exp(),
            tau,
            panel_ends: breaks[1..].to_vec(),
            nodes,
            kronrod,
            gauss,
            phases,
        })
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    /// Discounted call prices under `dynamics`.
    pub fn prices(&self, dynamics: Dynamics) -> Result<Vec<f64>, PricingError> {
        let cf = CharacteristicFunction::new(dynamics, self.forward, self.tau)?;
        let shift = Complex64::new(0.0, -0.5);
        let phi = |w: f64| cf.log_return(Complex64::new(w, 0.0) + shift);
        let w_max = truncation_point(|w| phi(w).norm() / (w * w + 0.25), CALL_TAIL);
        let used = 15 * (self.panel_ends.partition_point(|e| *e < w_max) + 1).min(self.panel_ends.len());
        let m = self.strikes.len();
        let mut kron = vec![0.0; m];
        let mut gauss = vec![0.0; m];
        for j in 0..used {
            let w = self.nodes[j];
            let v = phi(w) / (w * w + 0.25);
            let (wk, wg) = (self.kronrod[j], self.gauss[j]);
            for (i, rot) in self.phases[j * m..(j + 1) * m].iter().enumerate() {
                let re = rot.re * v.re - rot.im * v.im;
                kron[i] += wk * re;
                gauss[i] += wg * re;
            }
        }
        let err = kron.iter().zip(&gauss).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !err.is_finite() || err > PRICER_TOL * self.strikes.len() as f64 {
            return cf_call_prices(&cf, &self.strikes, -self.discount.ln() / self.tau, self.tau);
        }
        let f = self.forward;
        Ok(self
            .strikes
            .iter()
            .zip(&kron)
            .map(|(k, i)| self.discount * (f - (f * k).sqrt() / PI * i).max((f - k).max(0.0)))
            .collect())
    }
}
