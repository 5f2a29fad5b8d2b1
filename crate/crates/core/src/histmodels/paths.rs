//! Monte Carlo horizon prices and the density estimate built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GarchParams, HistError};
use crate::density::{ForecastDensity, LogReturnGrid};
use crate::stats::{mix_seed, quantile_sorted, sample_variance};

pub const MIN_PATHS: usize = 10_000;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Innovations {
    Normal,
    /// Student's t rescaled to unit variance.
    StudentT { dof: f64 },
    /// Resampled uniformly with replacement (filtered historical simulation).
    Empirical(Vec<f64>),
}

enum Sampler<'a> {
    Normal,
    T(StudentT<f64>, f64),
    Pool(&'a [f64]),
}

impl<'a> Sampler<'a> {
    fn new(innov: &'a Innovations) -> Result<Self, HistError> {
        Ok(match innov {
            Innovations::Normal => Sampler::Normal,
            Innovations::StudentT { dof } => {
                if !(*dof > 2.0) {
                    return Err(HistError::InvalidParams("t degrees of freedom must exceed 2".into()));
                }
                let t = StudentT::new(*dof).map_err(|e| HistError::InvalidParams(e.to_string()))?;
                Sampler::T(t, ((dof - 2.0) / dof).sqrt())
            }
            Innovations::Empirical(pool) => {
                if pool.is_empty() || pool.iter().any(|z| !z.is_finite()) {
                    return Err(HistError::InvalidParams("innovation pool must be non-empty and finite".into()));
                }
                Sampler::Pool(pool)
            }
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => StandardNormal.sample(rng),
            Sampler::T(t, scale) => scale * t.sample(rng),
            Sampler::Pool(pool) => pool[rng.random_range(0..pool.len())],
        }
    }
}

/// Calibrated dynamics of daily log-returns used for path simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathModel {
    /// Horizon log-return `tau * mu + sigma * sqrt(tau) * z`.
    Lognormal { mu: f64, sigma: f64 },
    /// Daily returns `mu + z`, `z` resampled from the demeaned window.
    Bootstrap { mu: f64, pool: Vec<f64> },
    /// Daily returns `mu + sqrt(h) z` with the GARCH/GJR variance recursion
    /// started at `start_variance`.
    Garch { params: GarchParams, start_variance: f64, innovations: Innovations },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub terminal: Vec<f64>,
    pub anchor: f64,
    pub tau_days: usize,
    pub seed: u64,
}

impl PathSet {
    pub fn log_returns(&self) -> Vec<f64> {
        self.terminal.iter().map(|p| (p / self.anchor).ln()).collect()
    }
}

fn horizon_log_return<R: Rng>(model: &PathModel, sampler: &Sampler, tau_days: usize, rng: &mut R) -> f64 {
    match model {
        PathModel::Lognormal { mu, sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            tau_days as f64 * mu + sigma * (tau_days as f64).sqrt() * z
        }
        PathModel::Bootstrap { mu, .. } => (0..tau_days).map(|_| mu + sampler.draw(rng)).sum(),
        PathModel::Garch { params, start_variance, .. } => {
            let mut h = *start_variance;
            let mut x = 0.0;
            for _ in 0..tau_days {
                let e = h.sqrt() * sampler.draw(rng);
                x += params.mu + e;
                h = params.update(e, h);
            }
            x
        }
    }
}

/// Simulate `n_paths` horizon prices `anchor * exp(sum of daily returns)`.
/// Paths are generated in fixed-size chunks with per-chunk RNG streams, so
/// the output does not depend on the thread count.
pub fn simulate_paths(model: &PathModel, anchor: f64, tau_days: usize, n_paths: usize, seed: u64) -> Result<PathSet, HistError> {
    if !(anchor > 0.0) {
        return Err(HistError::InvalidParams("anchor price must be positive".into()));
    }
    let default_innov = Innovations::Normal;
    let sampler = match model {
        PathModel::Lognormal { sigma, .. } => {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(HistError::InvalidParams("sigma must be finite and non-negative".into()));
            }
            Sampler::new(&default_innov)?
        }
        PathModel::Bootstrap { pool, .. } => {
            if pool.is_empty() {
                return Err(HistError::InvalidParams("bootstrap pool is empty".into()));
            }
            Sampler::Pool(pool)
        }
        PathModel::Garch { params, start_variance, innovations } => {
            params.validate()?;
            if !(start_variance.is_finite() && *start_variance >= 0.0) {
                return Err(HistError::InvalidParams("start variance must be finite and non-negative".into()));
            }
            Sampler::new(innovations)?
        }
    };
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, c as u64]));
            let len = CHUNK.min(n_paths - c * CHUNK);
            (0..len).map(|_| anchor * horizon_log_return(model, &sampler, tau_days, &mut rng).exp()).collect()
        })
        .collect();
    Ok(PathSet { terminal: chunks.concat(), anchor, tau_days, seed })
}

/// Density of the horizon log-return from simulated paths.
///
/// The CDF interpolates the mid-rank empirical CDF linearly between sample
/// values (0 below the minimum, 1 above the maximum); the pdf is a binned
/// Gaussian kernel estimate with Silverman's bandwidth, falling back to the
/// raw binned histogram when the bandwidth is below the grid step.
pub fn empirical_density(paths: &PathSet, grid: &LogReturnGrid) -> Result<ForecastDensity, HistError> {
    let n = paths.terminal.len();
    if n < MIN_PATHS {
        return Err(HistError::TooFewPaths { got: n, required: MIN_PATHS });
    }
    let mut y = paths.log_returns();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(HistError::InvalidParams("non-finite simulated log-return".into()));
    }
    y.sort_by(f64::total_cmp);

    // unique values with mid-rank CDF levels
    let mut values: Vec<f64> = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && y[j] == y[i] {
            j += 1;
        }
        values.push(y[i]);
        levels.push((i as f64 + 0.5 * (j - i) as f64) / n as f64);
        i = j;
    }
    let cdf: Vec<f64> = (0..grid.n)
        .map(|k| {
            let x = grid.point(k);
            let idx = values.partition_point(|v| *v < x);
            if idx < values.len() && values[idx] == x {
                levels[idx]
            } else if idx == 0 {
                0.0
            } else if idx == values.len() {
                1.0
            } else {
                let (x0, x1) = (values[idx - 1], values[idx]);
                levels[idx - 1] + (x - x0) / (x1 - x0) * (levels[idx] - levels[idx - 1])
            }
        })
        .collect();

    let h = grid.step();
    let mut mass = vec![0.0; grid.n];
    let w = 1.0 / n as f64;
    for &v in &y {
        let pos = grid.position(v);
        if pos < 0.0 || pos > (grid.n - 1) as f64 {
            continue;
        }
        let i0 = (pos.floor() as usize).min(grid.n - 1);
        let t = pos - i0 as f64;
        mass[i0] += w * (1.0 - t);
        if i0 + 1 < grid.n {
            mass[i0 + 1] += w * t;
        }
    }
    let sd = sample_variance(&y).sqrt();
    let iqr = quantile_sorted(&y, 0.75) - quantile_sorted(&y, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bandwidth = 0.9 * spread * (n as f64).powf(-0.2);
    let pdf: Vec<f64> = if bandwidth < h {
        mass.iter().map(|m| m / h).collect()
    } else {
        let half = (5.0 * bandwidth / h).ceil() as usize;
        let raw: Vec<f64> = (0..=2 * half)
            .map(|j| {
                let u = (j as f64 - half as f64) * h / bandwidth;
                (-0.5 * u * u).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let kernel: Vec<f64> = raw.iter().map(|k| k / total).collect();
        let mut out = vec![0.0; grid.n];
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, k) in kernel.iter().enumerate() {
                let idx = i as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < grid.n {
                    out[idx as usize] += m * k / h;
                }
            }
        }
        out
    };
    Ok(ForecastDensity::from_parts(*grid, &cdf, pdf, paths.anchor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{kurtosis, mean, norm_cdf, skewness};

    fn lognormal_paths(n: usize, seed: u64) -> PathSet {
        simulate_paths(&PathModel::Lognormal { mu: 0.0003, sigma: 0.012 }, 9000.0, 20, n, seed).unwrap()
    }

    #[test]
    fn zero_volatility_paths_are_deterministic() {
        let mu = 0.0004;
        let expected = 100.0 * (20.0 * mu as f64).exp();
        let models = [
            PathModel::Lognormal { mu, sigma: 0.0 },
            PathModel::Bootstrap { mu, pool: vec![0.0; 126] },
            PathModel::Garch {
                params: GarchParams { mu, omega: 0.0, alpha: 0.0, beta: 0.0, gamma: 0.0, dof: None, sigma2_0: 0.0 },
                start_variance: 0.0,
                innovations: Innovations::Normal,
            },
        ];
        for m in &models {
            let p = simulate_paths(m, 100.0, 20, 1000, 1).unwrap();
            assert!(p.terminal.iter().all(|x| (x / expected - 1.0).abs() < 1e-12), "{m:?}");
        }
    }

    #[test]
    fn lognormal_moments() {
        let p = lognormal_paths(100_000, 3);
        let y = p.log_returns();
        let n = y.len() as f64;
        let (m, v) = (mean(&y), sample_variance(&y));
        let (tm, tv) = (20.0 * 0.0003, 20.0 * 0.012f64 * 0.012);
        assert!((m - tm).abs() < 4.0 * (tv / n).sqrt(), "{m}");
        assert!((v - tv).abs() < 4.0 * tv * (2.0 / n).sqrt(), "{v}");
    }

    #[test]
    fn garch_one_step_variance() {
        let params = GarchParams { mu: 0.0, omega: 2e-6, alpha: 0.1, beta: 0.85, gamma: 0.0, dof: None, sigma2_0: 1e-4 };
        let h1 = 1.5e-4;
        let m = PathModel::Garch { params, start_variance: h1, innovations: Innovations::Normal };
        let p = simulate_paths(&m, 1.0, 1, 200_000, 4).unwrap();
        let y = p.log_returns();
        let v = sample_variance(&y);
        assert!((v - h1).abs() < 4.0 * h1 * (2.0 / 200_000f64).sqrt(), "{v}");
        // two steps: E[h2] = omega + (alpha + beta) h1
        let p2 = simulate_paths(&m, 1.0, 2, 200_000, 5).unwrap();
        let v2 = sample_variance(&p2.log_returns());
        let expected = h1 + params.omega + (params.alpha + params.beta) * h1;
        assert!((v2 / expected - 1.0).abs() < 0.03, "{v2} vs {expected}");
    }

    #[test]
    fn t_innovations_have_unit_variance() {
        let innov = Innovations::StudentT { dof: 6.0 };
        let s = Sampler::new(&innov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // 10^6 draws: the sampling sd of the variance is about 0.2%
        let z: Vec<f64> = (0..1_000_000).map(|_| s.draw(&mut rng)).collect();
        assert!((sample_variance(&z) - 1.0).abs() < 0.01, "{}", sample_variance(&z));
    }

    #[test]
    fn fhs_draws_keep_pool_shape() {
        // skewed, fat-tailed pool
        let pool: Vec<f64> = (0..1260)
            .map(|i| {
                let u = (i as f64 + 0.5) / 1260.0;
                let z = crate::stats::norm_inv(u);
                z + 0.15 * (z * z - 1.0)
            })
            .collect();
        let innov = Innovations::Empirical(pool.clone());
        let s = Sampler::new(&innov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z: Vec<f64> = (0..100_000).map(|_| s.draw(&mut rng)).collect();
        assert!((skewness(&z) / skewness(&pool) - 1.0).abs() < 0.05);
        assert!((kurtosis(&z) / kurtosis(&pool) - 1.0).abs() < 0.05);
    }

    #[test]
    fn paths_are_reproducible() {
        assert_eq!(lognormal_paths(10_000, 9), lognormal_paths(10_000, 9));
        assert_ne!(lognormal_paths(10_000, 9).terminal, lognormal_paths(10_000, 10).terminal);
    }

    #[test]
    fn degenerate_paths_give_half_at_anchor() {
        let p = PathSet { terminal: vec![9000.0; 10_000], anchor: 9000.0, tau_days: 20, seed: 0 };
        let d = empirical_density(&p, &LogReturnGrid::default()).unwrap();
        assert!((d.cdf_at(0.0) - 0.5).abs() < 1e-12);
        assert!(d.cdf_at(-0.01) == 0.0 && d.cdf_at(0.01) == 1.0);
        assert!((d.pdf_mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn density_matches_lognormal() {
        let p = lognormal_paths(100_000, 12);
        let grid = LogReturnGrid::default();
        let d = empirical_density(&p, &grid).unwrap();
        let (m, s) = (20.0 * 0.0003, 0.012 * 20f64.sqrt());
        let ks = grid.points().iter().zip(&d.cdf).map(|(y, c)| (c - norm_cdf((y - m) / s)).abs()).fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
        assert!((d.pdf_mass() - 1.0).abs() < 1e-3);
        d.validate().unwrap();
        assert!(matches!(empirical_density(&lognormal_paths(5000, 1), &grid), Err(HistError::TooFewPaths { .. })));
    }
}
