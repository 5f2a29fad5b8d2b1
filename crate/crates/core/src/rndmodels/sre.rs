//! Calibration of the stochastic models by minimizing the sum of relative
//! pricing errors over a cross-section of calls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RndError;
use crate::marketdata::CrossSection;
use crate::optim::{levenberg_marquardt, nelder_mead, Minimum, NelderMeadOptions};
use crate::pricing::{BatesParams, CallPricer, Dynamics, HestonParams, VgParams};
use crate::stats::mix_seed;

const RHO_SCALE: f64 = 0.999;
const COORD_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SreModel {
    Heston,
    Bates,
    Vg,
}

impl SreModel {
    fn tag(self) -> u64 {
        match self {
            SreModel::Heston => 1,
            SreModel::Bates => 2,
            SreModel::Vg => 3,
        }
    }

    fn dim(self) -> usize {
        match self {
            SreModel::Heston => 5,
            SreModel::Bates => 8,
            SreModel::Vg => 3,
        }
    }

    /// Map unconstrained coordinates to model parameters. `None` marks a
    /// point outside the admissible set.
    pub fn decode(self, x: &[f64]) -> Option<Dynamics> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite() || v.abs() > COORD_LIMIT) {
            return None;
        }
        let heston = |x: &[f64]| HestonParams {
            a: x[0].exp(),
            vbar: x[1].exp(),
            eta: x[2].exp(),
            rho: RHO_SCALE * x[3].tanh(),
            v0: x[4].exp(),
        };
        let dynamics = match self {
            SreModel::Heston => Dynamics::Heston(heston(x)),
            SreModel::Bates => Dynamics::Bates(BatesParams {
                heston: heston(x),
                lambda: x[5].exp(),
                mu_j: x[6].exp() - 1.0,
                nu_j: x[7].exp(),
            }),
            SreModel::Vg => {
                let p = VgParams { sigma: x[0].exp(), nu: x[1].exp(), theta: x[2] };
                if !p.feasible() {
                    return None;
                }
                Dynamics::Vg(p)
            }
        };
        dynamics.validate().ok().map(|_| dynamics)
    }

    /// Inverse of [`SreModel::decode`].
    pub fn encode(self, dynamics: &Dynamics) -> Option<Vec<f64>> {
        let h = |p: &HestonParams| vec![p.a.ln(), p.vbar.ln(), p.eta.ln(), (p.rho / RHO_SCALE).atanh(), p.v0.ln()];
        match (self, dynamics) {
            (SreModel::Heston, Dynamics::Heston(p)) => Some(h(p)),
            (SreModel::Bates, Dynamics::Bates(b)) => {
                let mut x = h(&b.heston);
                x.extend([b.lambda.ln(), (1.0 + b.mu_j).ln(), b.nu_j.ln()]);
                Some(x)
            }
            (SreModel::Vg, Dynamics::Vg(p)) => Some(vec![p.sigma.ln(), p.nu.ln(), p.theta]),
            _ => None,
        }
    }

    /// Start boxes (lo, hi) per natural parameter, in decode order.
    fn boxes(self) -> &'static [(f64, f64)] {
        const HESTON: [(f64, f64); 5] = [(0.5, 10.0), (0.005, 0.5), (0.05, 2.0), (-0.95, 0.2), (0.005, 0.5)];
        const BATES: [(f64, f64); 8] = [
            (0.5, 10.0),
            (0.005, 0.5),
            (0.05, 2.0),
            (-0.95, 0.2),
            (0.005, 0.5),
            (0.0, 3.0),
            (-0.3, 0.1),
            (0.0, 0.5),
        ];
        const VG: [(f64, f64); 3] = [(0.05, 0.6), (0.01, 2.0), (-0.5, 0.2)];
        match self {
            SreModel::Heston => &HESTON,
            SreModel::Bates => &BATES,
            SreModel::Vg => &VG,
        }
    }

    fn sample_start(self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let natural: Vec<f64> = self
            .boxes()
            .iter()
            .map(|&(lo, hi)| {
                if lo > 0.0 {
                    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
                } else {
                    // ranges touching zero are sampled uniformly, kept off the boundary
                    let v = lo + rng.random::<f64>() * (hi - lo);
                    if lo == 0.0 {
                        v.max(1e-3)
                    } else {
                        v
                    }
                }
            })
            .collect();
        let n = &natural;
        let h = || HestonParams { a: n[0], vbar: n[1], eta: n[2], rho: n[3], v0: n[4] };
        let d = match self {
            SreModel::Heston => Dynamics::Heston(h()),
            SreModel::Bates => Dynamics::Bates(BatesParams { heston: h(), lambda: n[5], mu_j: n[6], nu_j: n[7] }),
            SreModel::Vg => Dynamics::Vg(VgParams { sigma: n[0], nu: n[1], theta: n[2] }),
        };
        self.encode(&d).expect("start matches model")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SreOptions {
    pub starts: usize,
    pub evals_per_start: usize,
    /// Residual evaluations for the least-squares refinement of the best start.
    pub refine_evals: usize,
    pub polish_evals: usize,
    pub seed: u64,
}

impl Default for SreOptions {
    fn default() -> Self {
        Self { starts: 8, evals_per_start: 300, refine_evals: 1500, polish_evals: 600, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SreFit {
    pub model: SreModel,
    pub params: Dynamics,
    pub sre: f64,
    pub n_options: usize,
    pub per_option_errors: Vec<f64>,
    pub converged: bool,
    pub evals: usize,
}

/// Relative pricing errors `|C - C_model| / C` per quote.
pub fn relative_errors(dynamics: Dynamics, cs: &CrossSection) -> Option<Vec<f64>> {
    let pricer = CallPricer::new(cs.futures, &cs.strikes(), cs.cont_rate(), cs.tau()).ok()?;
    errors_with(&pricer, dynamics, cs)
}

fn errors_with(pricer: &CallPricer, dynamics: Dynamics, cs: &CrossSection) -> Option<Vec<f64>> {
    let model = pricer.prices(dynamics).ok()?;
    let errs: Vec<f64> = cs.quotes.iter().zip(&model).map(|(q, m)| (q.mid - m).abs() / q.mid).collect();
    errs.iter().all(|e| e.is_finite()).then_some(errs)
}

fn signed_errors(model: SreModel, x: &[f64], pricer: &CallPricer, cs: &CrossSection) -> Option<Vec<f64>> {
    let model = pricer.prices(model.decode(x)?).ok()?;
    let errs: Vec<f64> = cs.quotes.iter().zip(&model).map(|(q, m)| (m - q.mid) / q.mid).collect();
    errs.iter().all(|e| e.is_finite()).then_some(errs)
}

fn objective(model: SreModel, x: &[f64], pricer: &CallPricer, cs: &CrossSection) -> f64 {
    match model.decode(x) {
        None => f64::INFINITY,
        Some(d) => errors_with(pricer, d, cs).map_or(f64::INFINITY, |e| e.iter().sum()),
    }
}

/// SRE at unconstrained coordinates `x`; infinite outside the admissible set,
/// in which case no pricing is attempted.
pub fn sre_objective(model: SreModel, x: &[f64], cs: &CrossSection) -> f64 {
    if model.decode(x).is_none() {
        return f64::INFINITY;
    }
    match CallPricer::new(cs.futures, &cs.strikes(), cs.cont_rate(), cs.tau()) {
        Ok(pricer) => objective(model, x, &pricer, cs),
        Err(_) => f64::INFINITY,
    }
}

fn nm_options(max_evals: usize) -> NelderMeadOptions {
    NelderMeadOptions { max_evals, f_tol: 1e-10, x_tol: 1e-6, step: 0.3, restarts: 2 }
}

/// Multi-start Nelder-Mead on the SRE objective. Exhausting the budget is not
/// an error: the best point is returned with `converged = false`.
pub fn calibrate_sre(model: SreModel, cs: &CrossSection, opts: &SreOptions) -> Result<SreFit, RndError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[opts.seed, model.tag(), 0x5AE]));
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|_| loop {
            let x = model.sample_start(&mut rng);
            if model.decode(&x).is_some() {
                break x;
            }
        })
        .collect();
    let pricer = CallPricer::new(cs.futures, &cs.strikes(), cs.cont_rate(), cs.tau())?;
    let runs: Vec<Minimum> = starts
        .par_iter()
        .map(|x0| nelder_mead(|x| objective(model, x, &pricer, cs), x0, &nm_options(opts.evals_per_start)))
        .collect();
    let mut evals: usize = runs.iter().map(|m| m.evals).sum();
    let best = runs
        .into_iter()
        .filter(|m| m.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(RndError::NoFeasibleStart)?;
    // least squares on the signed relative errors, then back to the SRE itself
    let refined = levenberg_marquardt(|x| signed_errors(model, x, &pricer, cs), &best.x, opts.refine_evals);
    evals += refined.evals;
    let refined_sre = objective(model, &refined.x, &pricer, cs);
    let start = if refined_sre < best.value { refined.x } else { best.x.clone() };
    let polished = nelder_mead(|x| objective(model, x, &pricer, cs), &start, &nm_options(opts.polish_evals));
    evals += polished.evals;
    let (x, converged) = if polished.value <= best.value { (polished.x, polished.converged) } else { (best.x, best.converged) };
    let params = model.decode(&x).ok_or(RndError::NoFeasibleStart)?;
    let per_option_errors = errors_with(&pricer, params, cs).ok_or(RndError::NoFeasibleStart)?;
    Ok(SreFit {
        model,
        params,
        sre: per_option_errors.iter().sum(),
        n_options: per_option_errors.len(),
        per_option_errors,
        converged,
        evals,
    })
}
