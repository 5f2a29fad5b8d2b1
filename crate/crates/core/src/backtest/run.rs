//! Per-cycle calibration and scoring of every scheme in the roster.

use std::error::Error;

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{build_schedule, chain_expiries, check_windows, date_key, BacktestConfig, BacktestError, Cycle, ModelId, ScoreBoard};
use crate::density::ForecastDensity;
use crate::evaluation::{crps_rb, log_density, pit};
use crate::histmodels::{
    calibrate_garch, calibrate_lognormal_hist, empirical_density, simulate_paths, GarchVariant, HistError, Innovations,
    PathModel, ReturnWindow, WindowLabel,
};
use crate::marketdata::calendar::{third_friday, BusinessCalendar};
use crate::marketdata::MarketData;
use crate::rndmodels::{atm_vol, calibrate_sre, lognormal_rnd, malz_rnd, rnd_from_cf, SreModel, SreOptions};
use crate::stats::mix_seed;

/// Log-return quantile levels recorded for fan charts.
pub const FAN_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

type TaskError = Box<dyn Error + Send + Sync>;

/// What happened for one (cycle, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub obs_date: NaiveDate,
    pub expiry: NaiveDate,
    pub model: ModelId,
    pub seed: u64,
    pub futures: f64,
    pub realization: f64,
    pub error: Option<String>,
    pub params: Value,
    pub diagnostics: Value,
    /// Log-return quantiles at `FAN_LEVELS`.
    pub quantiles: Option<Vec<f64>>,
    pub pit: Option<f64>,
    pub log_density: Option<f64>,
    pub crps: Option<f64>,
}

impl AuditRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestOutput {
    pub scoreboard: ScoreBoard,
    /// Ordered by observation date, then roster position.
    pub audit: Vec<AuditRecord>,
    pub cycles: Vec<Cycle>,
}

struct Forecast {
    density: ForecastDensity,
    params: Value,
    diagnostics: Value,
}

fn historical(
    model: ModelId,
    label: WindowLabel,
    cfg: &BacktestConfig,
    cycle: &Cycle,
    data: &MarketData,
    seed: u64,
) -> Result<Forecast, TaskError> {
    let window = ReturnWindow::from_history_len(&data.history, cycle.obs_date, label, cfg.window_len(label))?;
    assert!(window.end_date <= cycle.obs_date, "calibration window reaches past the observation date");
    let garch = |variant| -> Result<_, TaskError> {
        let fit = calibrate_garch(&window, variant)?;
        let diag = json!({ "loglik": fit.loglik, "converged": fit.converged, "evals": fit.evals, "next_variance": fit.next_variance });
        Ok((fit, diag))
    };
    let (path_model, params, diagnostics) = match model {
        ModelId::LnHis(_) => {
            let (mu, sigma) = calibrate_lognormal_hist(&window)?;
            (PathModel::Lognormal { mu, sigma }, json!({ "mu": mu, "sigma": sigma }), json!({}))
        }
        ModelId::Bts(_) => {
            window.variance().ok_or(HistError::DegenerateWindow)?;
            let mu = window.mean();
            (PathModel::Bootstrap { mu, pool: window.demeaned() }, json!({ "mu": mu }), json!({ "pool": window.len() }))
        }
        ModelId::GarchN(_) => {
            let (fit, diag) = garch(GarchVariant::Normal)?;
            let m = PathModel::Garch { params: fit.params, start_variance: fit.next_variance, innovations: Innovations::Normal };
            (m, serde_json::to_value(fit.params)?, diag)
        }
        ModelId::GarchT(_) => {
            let (fit, diag) = garch(GarchVariant::StudentT)?;
            let dof = fit.params.dof.ok_or("t fit without degrees of freedom")?;
            let m = PathModel::Garch {
                params: fit.params,
                start_variance: fit.next_variance,
                innovations: Innovations::StudentT { dof },
            };
            (m, serde_json::to_value(fit.params)?, diag)
        }
        ModelId::GjrFhs(_) => {
            let (fit, diag) = garch(GarchVariant::Gjr)?;
            let params = serde_json::to_value(fit.params)?;
            let m = PathModel::Garch {
                params: fit.params,
                start_variance: fit.next_variance,
                innovations: Innovations::Empirical(fit.scaled_residuals),
            };
            (m, params, diag)
        }
        _ => unreachable!("option-implied model routed to historical"),
    };
    let paths = simulate_paths(&path_model, cycle.futures, cycle.tau_business, cfg.n_paths, seed)?;
    let density = empirical_density(&paths, &cfg.grid)?;
    Ok(Forecast { density, params, diagnostics })
}

fn option_implied(model: ModelId, cfg: &BacktestConfig, cycle: &Cycle, seed: u64) -> Result<Forecast, TaskError> {
    let cs = cycle.cross_section.as_ref().ok_or("no usable option cross-section")?;
    let grid = &cfg.grid;
    let sre = |m: SreModel| -> Result<Forecast, TaskError> {
        let fit = calibrate_sre(m, cs, &SreOptions { seed, ..cfg.sre })?;
        let density = rnd_from_cf(fit.params, cs.futures, cs.tau(), grid)?;
        let diagnostics = json!({ "sre": fit.sre, "options": fit.n_options, "converged": fit.converged, "evals": fit.evals });
        Ok(Forecast { density, params: serde_json::to_value(fit.params)?, diagnostics })
    };
    match model {
        ModelId::LnAtm => {
            let sigma = atm_vol(cs)?;
            let density = lognormal_rnd(cs.futures, sigma, cs.tau(), grid);
            Ok(Forecast { density, params: json!({ "sigma": sigma }), diagnostics: json!({ "options": cs.quotes.len() }) })
        }
        ModelId::Heston => sre(SreModel::Heston),
        ModelId::Bates => sre(SreModel::Bates),
        ModelId::Vg => sre(SreModel::Vg),
        ModelId::BlMalz => {
            let (density, info) = malz_rnd(cs, grid)?;
            Ok(Forecast { density, params: json!({}), diagnostics: serde_json::to_value(info)? })
        }
        _ => unreachable!("historical model routed to option-implied"),
    }
}

/// Seed of the RNG stream for one (model, observation date) pair.
pub fn task_seed(master: u64, model: ModelId, obs_date: NaiveDate) -> u64 {
    mix_seed(&[master, model.code(), date_key(obs_date)])
}

fn run_task(model: ModelId, cfg: &BacktestConfig, cycle: &Cycle, data: &MarketData) -> AuditRecord {
    let seed = task_seed(cfg.seed, model, cycle.obs_date);
    let forecast = match model.window() {
        Some(label) => historical(model, label, cfg, cycle, data, seed),
        None => option_implied(model, cfg, cycle, seed),
    }
    .and_then(|f| {
        f.density.validate()?;
        Ok(f)
    });
    let mut rec = AuditRecord {
        obs_date: cycle.obs_date,
        expiry: cycle.expiry,
        model,
        seed,
        futures: cycle.futures,
        realization: cycle.realization,
        error: None,
        params: Value::Null,
        diagnostics: Value::Null,
        quantiles: None,
        pit: None,
        log_density: None,
        crps: None,
    };
    match forecast {
        Err(e) => rec.error = Some(e.to_string()),
        Ok(f) => {
            let d = &f.density;
            rec.quantiles = Some(FAN_LEVELS.iter().map(|q| d.quantile(*q)).collect());
            rec.pit = Some(pit(d, cycle.realization));
            rec.log_density = Some(log_density(d, cycle.realization));
            rec.crps = Some(crps_rb(d, cycle.realization));
            rec.params = f.params;
            rec.diagnostics = f.diagnostics;
        }
    }
    rec
}

/// Third Fridays of every month covered by the history, used when no option
/// chains are supplied.
fn monthly_expiries(data: &MarketData) -> Vec<NaiveDate> {
    let (first, last) = (data.history.first_date(), data.history.last_date());
    let mut out = Vec::new();
    let (mut y, mut m) = (first.year(), first.month());
    loop {
        let e = third_friday(y, m);
        if e > last {
            break;
        }
        if e - Duration::days(super::HORIZON_DAYS) >= first {
            out.push(e);
        }
        (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    }
    out
}

/// Schedule the cycles and check the configuration against the data.
pub fn prepare(config: &BacktestConfig, data: &MarketData) -> Result<(Vec<Cycle>, Vec<String>), BacktestError> {
    config.validate()?;
    let calendar = BusinessCalendar::new(config.holidays.iter().copied());
    let expiries = if data.chains.is_empty() { monthly_expiries(data) } else { chain_expiries(data) };
    let (cycles, diagnostics) = build_schedule(&expiries, data, &calendar)?;
    if cycles.is_empty() {
        return Err(BacktestError::NoCycles);
    }
    check_windows(config, &cycles, data)?;
    Ok((cycles, diagnostics))
}

/// Run every roster model on every cycle and score the results. Each task
/// draws from its own RNG stream, so the output does not depend on the
/// number of worker threads.
pub fn run_backtest(config: &BacktestConfig, data: &MarketData) -> Result<BacktestOutput, BacktestError> {
    let (cycles, diagnostics) = prepare(config, data)?;
    let tasks: Vec<(usize, ModelId)> =
        (0..cycles.len()).flat_map(|c| config.roster.iter().map(move |m| (c, *m))).collect();
    let audit: Vec<AuditRecord> =
        tasks.par_iter().map(|(c, m)| run_task(*m, config, &cycles[*c], data)).collect();
    let scoreboard = ScoreBoard::assemble(config, cycles.len(), &audit, diagnostics)?;
    Ok(BacktestOutput { scoreboard, audit, cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{synth_generate, SynthConfig, World};

    fn small_world(seed: u64) -> MarketData {
        let mut cfg = SynthConfig::new(World::Lognormal { sigma: 0.2 }, 6, seed);
        cfg.warmup_days = 140;
        let ds = synth_generate(&cfg).unwrap();
        MarketData { history: ds.history, rates: ds.rates, chains: ds.chains }
    }

    fn small_config() -> BacktestConfig {
        BacktestConfig {
            roster: vec![ModelId::LnHis(WindowLabel::SixMonths), ModelId::Bts(WindowLabel::SixMonths), ModelId::LnAtm, ModelId::BlMalz],
            n_paths: 10_000,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn runs_and_orders_records() {
        let data = small_world(2);
        let out = run_backtest(&small_config(), &data).unwrap();
        assert_eq!(out.cycles.len(), 6);
        assert_eq!(out.audit.len(), 24);
        assert!(out.audit.iter().all(AuditRecord::is_ok), "{:?}", out.audit.iter().find(|r| !r.is_ok()));
        assert!(out.audit.windows(2).all(|w| w[0].obs_date <= w[1].obs_date));
        assert_eq!(out.audit[1].model, ModelId::Bts(WindowLabel::SixMonths));
        // the seed depends on model and date only
        assert_eq!(out.audit[0].seed, task_seed(9, out.audit[0].model, out.audit[0].obs_date));
        assert_ne!(out.audit[0].seed, out.audit[1].seed);
    }

    #[test]
    fn long_window_is_rejected_up_front() {
        let data = small_world(3);
        let cfg = BacktestConfig { roster: vec![ModelId::GarchN(WindowLabel::FiveYears)], ..small_config() };
        match run_backtest(&cfg, &data) {
            Err(BacktestError::WindowInfeasible { needed: 1260, obs_date, .. }) => {
                assert_eq!(obs_date, data.chains[0].obs_date)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_options_exclude_only_option_models() {
        let mut data = small_world(4);
        data.chains.remove(2);
        let out = run_backtest(&small_config(), &data).unwrap();
        // without that chain its expiry is no longer scheduled
        assert_eq!(out.cycles.len(), 5);
        let mut data = small_world(4);
        data.chains[2].quotes.truncate(2);
        let out = run_backtest(&small_config(), &data).unwrap();
        assert_eq!(out.cycles.len(), 6);
        let failed: Vec<_> = out.audit.iter().filter(|r| !r.is_ok()).collect();
        assert_eq!(failed.len(), 2);
        assert!(failed.iter().all(|r| !r.model.is_historical() && r.obs_date == data.chains[2].obs_date));
        let atm = out.scoreboard.models.iter().find(|m| m.model == ModelId::LnAtm).unwrap();
        assert_eq!((atm.evaluated, atm.excluded), (5, 1));
    }
}
