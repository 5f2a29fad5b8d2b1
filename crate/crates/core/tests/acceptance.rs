//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use densitybench::backtest::{run_backtest, BacktestConfig, ModelId};
use densitybench::density::{ForecastDensity, LogReturnGrid};
use densitybench::evaluation::{berkowitz_lr3, crps_on_grid, crps_rb, jarque_bera, pit, PitSequence};
use densitybench::histmodels::{calibrate_garch, GarchVariant, ReturnWindow, WindowLabel};
use densitybench::marketdata::{synth_generate, MarketData, SynthConfig, World};
use densitybench::pricing::{
    black76_price, cf_call_price, cf_to_cdf, CharacteristicFunction, Dynamics, HestonParams, OptionKind, VgParams,
};
use densitybench::rndmodels::{atm_vol, lognormal_rnd, rnd_from_cf, SreOptions};
use densitybench::stats::{norm_cdf, norm_pdf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn ifs_reproduction() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    common::write_inputs(dir.path(), &(0..15).collect::<Vec<_>>());
    let out = dir.path().join("ifs.csv");
    let status = Command::new(common::bin())
        .arg("score-tables")
        .args(["--p-values", dir.path().join("p_values.csv").to_str().unwrap()])
        .args(["--loglik", dir.path().join("loglik.csv").to_str().unwrap()])
        .args(["--crps", dir.path().join("crps.csv").to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    let elapsed = start.elapsed();
    if !status.success() {
        return Err(format!("score-tables exited with {status}"));
    }
    let rows = common::read_ifs(&out);
    let mut worst = 0.0f64;
    let mut rank_misses = Vec::new();
    for (i, name) in common::MODELS.iter().enumerate() {
        let r = rows.iter().find(|r| r.model == *name).ok_or(format!("{name} missing"))?;
        let (ifs, ir, c, cr, a, ar, e, er) = common::SCORES[i];
        for (got, want) in [(r.ifs, ifs), (r.consistency, c), (r.accuracy, a), (r.errors, e)] {
            worst = worst.max((got - want).abs());
        }
        if (r.ifs_rank, r.consistency_rank, r.accuracy_rank, r.errors_rank) != (ir, cr, ar, er) {
            rank_misses.push(name.to_string());
        }
    }
    let detail = format!("max score deviation {worst:.4}, rank mismatches {rank_misses:?}");
    if worst > 0.002 || !rank_misses.is_empty() {
        return Err(detail);
    }
    within(elapsed, Duration::from_secs(1), detail)
}

fn fourier_oracle() -> Outcome {
    let start = Instant::now();
    let (f, tau, sigma, r) = (2500.0, 28.0 / 365.0, 0.2, 0.01);
    let degenerate = HestonParams { a: 0.0, vbar: sigma * sigma, eta: 0.0, rho: 0.0, v0: sigma * sigma };
    let cf = CharacteristicFunction::new(Dynamics::Heston(degenerate), f, tau).unwrap();
    let sd = sigma * tau.sqrt();
    let mut cdf_err = 0.0f64;
    for i in 0..50 {
        let y = -4.0 * sd + 8.0 * sd * i as f64 / 49.0;
        let x = f * y.exp();
        let exact = norm_cdf((y + 0.5 * sd * sd) / sd);
        cdf_err = cdf_err.max((cf_to_cdf(&cf, x).unwrap() - exact).abs());
    }
    let mut price_err = 0.0f64;
    for i in 0..20 {
        let k = f * (0.8 + 0.4 * i as f64 / 19.0);
        let bs = black76_price(f, k, r, tau, sigma, OptionKind::Call);
        price_err = price_err.max((cf_call_price(&cf, k, r, tau).unwrap() - bs).abs() / bs);
    }
    let detail = format!("CDF max abs error {cdf_err:.2e}, call max rel error {price_err:.2e}");
    if cdf_err >= 1e-6 || price_err >= 1e-6 {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(10), detail)
}

const MC_PATHS: usize = 1_000_000;
const MC_CHUNK: usize = 10_000;

/// Terminal log-returns from a full-truncation Euler scheme.
fn heston_paths(p: HestonParams, tau: f64, steps: usize, seed: u64) -> Vec<f64> {
    let dt = tau / steps as f64;
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    (0..MC_PATHS / MC_CHUNK)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            (0..MC_CHUNK)
                .map(|_| {
                    let (mut x, mut v) = (0.0f64, p.v0);
                    for _ in 0..steps {
                        let (z1, z2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                        let vp = v.max(0.0);
                        x += -0.5 * vp * dt + (vp * dt).sqrt() * z1;
                        v += p.a * (p.vbar - vp) * dt + p.eta * (vp * dt).sqrt() * (p.rho * z1 + rho_c * z2);
                    }
                    x
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Terminal log-returns by exact gamma-subordinated Brownian motion.
fn vg_paths(p: VgParams, tau: f64, seed: u64) -> Vec<f64> {
    let omega = (1.0 - p.theta * p.nu - 0.5 * p.sigma * p.sigma * p.nu).ln() / p.nu;
    let gamma = Gamma::new(tau / p.nu, p.nu).unwrap();
    (0..MC_PATHS / MC_CHUNK)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            (0..MC_CHUNK)
                .map(|_| {
                    let g = gamma.sample(&mut rng);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    omega * tau + p.theta * g + p.sigma * g.sqrt() * z
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Largest gap between the Fourier CDF and the empirical CDF at 50 points
/// spanning the 1% to 99% empirical quantiles.
fn mc_gap(dynamics: Dynamics, tau: f64, mut ys: Vec<f64>) -> f64 {
    let f = 100.0;
    let cf = CharacteristicFunction::new(dynamics, f, tau).unwrap();
    ys.sort_by(f64::total_cmp);
    let n = ys.len() as f64;
    let (lo, hi) = (ys[(0.01 * n) as usize], ys[(0.99 * n) as usize]);
    (0..50)
        .map(|i| {
            let y = lo + (hi - lo) * i as f64 / 49.0;
            let empirical = ys.partition_point(|v| *v <= y) as f64 / n;
            (cf_to_cdf(&cf, f * y.exp()).unwrap() - empirical).abs()
        })
        .fold(0.0, f64::max)
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let tau = 0.25;
    let h = HestonParams { a: 2.0, vbar: 0.05, eta: 0.5, rho: -0.7, v0: 0.04 };
    let vg = VgParams { sigma: 0.2, nu: 0.3, theta: -0.15 };
    let heston_gap = mc_gap(Dynamics::Heston(h), tau, heston_paths(h, tau, 250, 11));
    let vg_gap = mc_gap(Dynamics::Vg(vg), tau, vg_paths(vg, tau, 12));
    let detail = format!("Heston max gap {heston_gap:.2e}, VG max gap {vg_gap:.2e}");
    if heston_gap >= 3e-3 || vg_gap >= 3e-3 {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(120), detail)
}

fn garch_recovery() -> Outcome {
    let start = Instant::now();
    let (omega, alpha, beta): (f64, f64, f64) = (1e-6, 0.08, 0.90);
    let end = NaiveDate::from_ymd_opt(2016, 12, 16).unwrap();
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut h = omega / (1.0 - alpha - beta);
        let mut r = Vec::with_capacity(10_000);
        for t in 0..10_500 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = h.sqrt() * z;
            if t >= 500 {
                r.push(x);
            }
            h = omega + alpha * x * x + beta * h;
        }
        let w = ReturnWindow::new(r, WindowLabel::FiveYears, end).unwrap();
        let fit = match calibrate_garch(&w, GarchVariant::Normal) {
            Ok(f) => f,
            Err(e) => {
                misses.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let p = fit.params;
        if (p.omega - omega).abs() < 5e-7 && (p.alpha - alpha).abs() < 0.03 && (p.beta - beta).abs() < 0.04 {
            hits += 1;
        } else {
            misses.push(format!("seed {seed}: ({:.2e}, {:.3}, {:.3})", p.omega, p.alpha, p.beta));
        }
    }
    let detail = format!("{hits}/10 seeds recovered {misses:?}");
    if hits < 9 {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(60), detail)
}

fn market(ds: densitybench::marketdata::SynthDataset) -> MarketData {
    MarketData { history: ds.history, rates: ds.rates, chains: ds.chains }
}

fn self_consistency() -> Outcome {
    let start = Instant::now();
    let mut sc = SynthConfig::new(World::Lognormal { sigma: 0.2 }, 200, 2026);
    sc.warmup_days = 30;
    let data = market(synth_generate(&sc).unwrap());
    let cfg = BacktestConfig { roster: vec![ModelId::LnAtm], n_paths: 10_000, seed: 1, ..Default::default() };
    let out = run_backtest(&cfg, &data).map_err(|e| e.to_string())?;
    let m = out.scoreboard.model(ModelId::LnAtm).unwrap();
    let p = |t: &Option<densitybench::evaluation::TestResult>| t.as_ref().map_or(f64::NAN, |t| t.p_value);
    let (pb, pj, pk) = (p(&m.berkowitz), p(&m.jarque_bera), p(&m.ks));
    let passed = [pb, pj, pk].iter().all(|v| *v > 0.05) && m.evaluated == 200;

    let rejections = (0..1000u64)
        .into_par_iter()
        .filter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + s);
            let z: Vec<f64> = (0..254).map(|_| StandardNormal.sample(&mut rng)).collect();
            berkowitz_lr3(&z).unwrap().p_value < 0.05
        })
        .count();
    let size = rejections as f64 / 10.0;
    let detail = format!(
        "{} cycles, p-values Berkowitz {:.3} JB {:.3} KS {:.3}; Berkowitz size {size:.1}%",
        m.evaluated, pb, pj, pk
    );
    if !passed || !(3.5..=6.5).contains(&size) {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(300), detail)
}

fn crps_oracle() -> Outcome {
    // unit Gaussian in return space, realization at the mean
    let xs: Vec<f64> = (0..=16_000).map(|i| -8.0 + i as f64 * 0.001).collect();
    let cdf: Vec<f64> = xs.iter().map(|x| norm_cdf(*x)).collect();
    let unit = crps_on_grid(&xs, &cdf, 0.0).sqrt();
    let exact = (2.0 * norm_pdf(0.0) - 1.0 / std::f64::consts::PI.sqrt()).sqrt();

    // the same shape at 5% scale through the forecast-density path
    let grid = LogReturnGrid::default();
    let s = 0.05;
    let raw: Vec<f64> = grid.points().iter().map(|y| norm_cdf((y.exp() - 1.0) / s)).collect();
    let narrow = crps_rb(&ForecastDensity::from_cdf(grid, &raw, 100.0), 100.0);
    let scaled = narrow / s.sqrt();

    let point = ForecastDensity::point_mass(grid, grid.point(1600), 100.0);
    let pm = crps_rb(&point, 100.0 * grid.point(1600).exp());
    let detail = format!("unit {unit:.6} (exact {exact:.6}), scaled {scaled:.6}, point mass {pm:.1e}");
    if (unit - 0.48342).abs() < 1e-4 && (scaled - exact).abs() < 1e-3 && pm < 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn klic_ordering() -> Outcome {
    let world = HestonParams { a: 2.0, vbar: 0.04, eta: 0.6, rho: -0.7, v0: 0.04 };
    let mut sc = SynthConfig::new(World::Heston { params: world }, 500, 77);
    sc.warmup_days = 130;
    let ds = synth_generate(&sc).unwrap();
    let truth = ds.truth.clone();
    let data = market(ds);
    let roster = vec![ModelId::LnAtm, ModelId::Heston, ModelId::LnHis(WindowLabel::SixMonths)];
    let sre = SreOptions { starts: 2, evals_per_start: 100, refine_evals: 300, polish_evals: 100, seed: 0 };
    let cfg = BacktestConfig { roster: roster.clone(), n_paths: 20_000, seed: 5, sre, ..Default::default() };
    let out = run_backtest(&cfg, &data).map_err(|e| e.to_string())?;
    let board = &out.scoreboard;
    // compare on the cycles every model scored
    let common: Vec<NaiveDate> = out
        .cycles
        .iter()
        .map(|c| c.obs_date)
        .filter(|d| roster.iter().all(|m| out.audit.iter().any(|r| r.obs_date == *d && r.model == *m && r.is_ok())))
        .collect();
    let ll = |m: ModelId| -> f64 {
        out.audit
            .iter()
            .filter(|r| r.model == m && common.contains(&r.obs_date))
            .map(|r| r.log_density.unwrap())
            .sum()
    };
    let scores: Vec<String> = roster.iter().map(|m| format!("{m} {:.1}", ll(*m))).collect();
    let best = roster.iter().copied().max_by(|a, b| ll(*a).total_cmp(&ll(*b))).unwrap();

    // the generating density itself, for reference
    let grid = LogReturnGrid::default();
    let true_ll: f64 = truth
        .cycles
        .iter()
        .filter(|c| common.contains(&c.obs_date))
        .filter_map(|c| {
            let d = rnd_from_cf(c.dynamics()?, c.futures, 28.0 / 365.0, &grid).ok()?;
            Some(densitybench::evaluation::log_density(&d, c.realization))
        })
        .sum();

    // a lognormal at half the at-the-money volatility
    let mut narrow = PitSequence::default();
    for c in &out.cycles {
        if let Some(cs) = &c.cross_section {
            if let Ok(v) = atm_vol(cs) {
                narrow.push(c.obs_date, pit(&lognormal_rnd(cs.futures, 0.5 * v, cs.tau(), &grid), c.realization));
            }
        }
    }
    let bk = berkowitz_lr3(&narrow.tpits).map_err(|e| e.to_string())?;
    let jb = jarque_bera(&narrow.tpits).map_err(|e| e.to_string())?;
    let rejected = bk.p_value < 0.05 || jb.p_value < 0.05;
    let excluded: usize = board.models.iter().map(|m| m.excluded).sum();
    let detail = format!(
        "log scores over {} common cycles {scores:?} (generating density {true_ll:.1}), {excluded} exclusions; narrow density p-values Berkowitz {:.1e} JB {:.1e}",
        common.len(),
        bk.p_value,
        jb.p_value
    );
    if best == ModelId::Heston && rejected {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let world = HestonParams { a: 2.0, vbar: 0.04, eta: 0.5, rho: -0.6, v0: 0.04 };
    let mut sc = SynthConfig::new(World::Heston { params: world }, 3, 8);
    sc.warmup_days = 1270;
    let data = market(synth_generate(&sc).unwrap());
    let sre = SreOptions { starts: 2, evals_per_start: 60, refine_evals: 100, polish_evals: 60, seed: 0 };
    let cfg = BacktestConfig { n_paths: 10_000, seed: 42, sre, ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_backtest(&cfg, &data)).unwrap();
        (serde_json::to_string_pretty(&out.scoreboard).unwrap(), serde_json::to_string(&out.audit).unwrap())
    };
    let (a, audit_a) = run(1);
    let (b, audit_b) = run(3);
    let same = a == b && audit_a == audit_b;
    let detail = format!("15 models x 3 cycles, scoreboard {} bytes, identical: {same}", a.len());
    if same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("IFS reproduction", ifs_reproduction),
        ("Fourier oracle", fourier_oracle),
        ("Monte Carlo cross-check", monte_carlo),
        ("GARCH recovery", garch_recovery),
        ("Self-consistency of verification", self_consistency),
        ("CRPS oracle", crps_oracle),
        ("KLIC ordering", klic_ordering),
        ("Determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {} {name}: PASS ({secs:.1}s) {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1}s) {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
