//! Synthetic futures/options worlds with a known generating process.
//!
//! Prices follow the generating dynamics under a single measure (no risk
//! premium), so each cycle's option-implied distribution is also the true
//! distribution of the realization. One business day spans `HORIZON_YEARS / 20`
//! model years, which makes every 28-day cycle exactly one horizon long.

use chrono::{Datelike, Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{
    calendar::{third_friday, BusinessCalendar},
    discount_factor, FuturesBar, MarketError, OptionChain, OptionQuote, PriceHistory, RateCurve,
};
use crate::pricing::{black76_price, cf_call_prices, CharacteristicFunction, Dynamics, HestonParams, OptionKind};
use crate::stats::mix_seed;

pub const HORIZON_DAYS: i64 = 28;
pub const HORIZON_YEARS: f64 = HORIZON_DAYS as f64 / 365.0;
const BUSINESS_DAYS_PER_HORIZON: f64 = 20.0;
const SUBSTEPS: usize = 4;
/// The truncated Euler variance can touch zero; option prices use at least this.
const MIN_STATE_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum World {
    Lognormal { sigma: f64 },
    /// `v0` is the variance on the first simulated day.
    Heston { params: HestonParams },
    /// Daily GJR-GARCH variance with Gaussian innovations; `omega` is in daily
    /// variance units.
    Gjr { omega: f64, alpha: f64, beta: f64, gamma: f64 },
}

impl World {
    pub fn validate(&self) -> Result<(), MarketError> {
        match *self {
            World::Lognormal { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(MarketError::InvalidWorld("lognormal sigma must be positive".into()))
            }
            World::Heston { params } => params.validate().map_err(|e| MarketError::InvalidWorld(e.to_string())),
            World::Gjr { omega, alpha, beta, gamma } => {
                let ok = [omega, alpha, beta, gamma].iter().all(|v| v.is_finite() && *v >= 0.0)
                    && omega > 0.0
                    && alpha + beta + 0.5 * gamma < 1.0;
                if ok {
                    Ok(())
                } else {
                    Err(MarketError::InvalidWorld(
                        "GJR needs omega > 0, non-negative coefficients and alpha + beta + gamma/2 < 1".into(),
                    ))
                }
            }
            World::Lognormal { .. } => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            World::Lognormal { .. } => "lognormal",
            World::Heston { .. } => "heston",
            World::Gjr { .. } => "gjr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub world: World,
    pub n_cycles: usize,
    pub seed: u64,
    pub start: NaiveDate,
    pub initial_price: f64,
    /// Constant simple act/360 rate.
    pub rate: f64,
    /// Business days simulated before the first observation date.
    pub warmup_days: usize,
    /// Strike spacing at the initial price level; scales with the futures price.
    pub strike_step: f64,
    /// Options priced below this (at the initial price level) are not quoted.
    pub min_price: f64,
    pub rel_half_spread: f64,
    pub tick: f64,
}

impl SynthConfig {
    pub fn new(world: World, n_cycles: usize, seed: u64) -> Self {
        Self {
            world,
            n_cycles,
            seed,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
            initial_price: 10_000.0,
            rate: 0.02,
            warmup_days: 1300,
            strike_step: 100.0,
            min_price: 1.0,
            rel_half_spread: 0.005,
            tick: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        self.world.validate()?;
        if self.n_cycles == 0 {
            return Err(MarketError::InvalidWorld("at least one cycle is required".into()));
        }
        let positive = [self.initial_price, self.strike_step, self.min_price, self.tick];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.rel_half_spread >= 0.0) {
            return Err(MarketError::InvalidWorld("prices, steps and spreads must be positive".into()));
        }
        if !self.rate.is_finite() {
            return Err(MarketError::InvalidWorld("rate must be finite".into()));
        }
        Ok(())
    }
}

/// Generating state of the realization for one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueState {
    Lognormal { sigma: f64 },
    /// Heston parameters with `v0` set to the variance at the observation date.
    Heston { params: HestonParams },
    Gjr { next_variance: f64, expected_integrated_variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub obs_date: NaiveDate,
    pub expiry: NaiveDate,
    pub futures: f64,
    pub realization: f64,
    pub business_days: usize,
    pub state: TrueState,
}

impl CycleTruth {
    /// Dynamics with a closed-form CF, when the world has one.
    pub fn dynamics(&self) -> Option<Dynamics> {
        match self.state {
            TrueState::Lognormal { sigma } => Some(Dynamics::Lognormal { sigma }),
            TrueState::Heston { params } => Some(Dynamics::Heston(params)),
            TrueState::Gjr { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub config: SynthConfig,
    pub horizon_years: f64,
    pub cycles: Vec<CycleTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub history: PriceHistory,
    pub rates: RateCurve,
    pub chains: Vec<OptionChain>,
    pub truth: Truth,
}

impl SynthDataset {
    /// Writes `futures.csv`, `rates.csv`, `options.csv` and `truth.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), MarketError> {
        std::fs::create_dir_all(dir)?;
        self.history.write_csv(std::fs::File::create(dir.join("futures.csv"))?)?;
        self.rates.write_csv(std::fs::File::create(dir.join("rates.csv"))?)?;
        super::write_option_chains(&self.chains, std::fs::File::create(dir.join("options.csv"))?)?;
        let json = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(dir.join("truth.json"), json + "\n")?;
        Ok(())
    }
}

fn expiries_after(first_obs: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let (mut y, mut m) = (first_obs.year(), first_obs.month());
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let e = third_friday(y, m);
        if e - Duration::days(HORIZON_DAYS) >= first_obs {
            out.push(e);
        }
        if m == 12 {
            y += 1;
            m = 1;
        } else {
            m += 1;
        }
    }
    out
}

struct Step {
    z1: [f64; SUBSTEPS],
    z2: [f64; SUBSTEPS],
}

fn draw_step(rng: &mut ChaCha8Rng) -> Step {
    let mut s = Step { z1: [0.0; SUBSTEPS], z2: [0.0; SUBSTEPS] };
    for i in 0..SUBSTEPS {
        s.z1[i] = StandardNormal.sample(rng);
        s.z2[i] = StandardNormal.sample(rng);
    }
    s
}

/// Mutable simulation state of the generating process.
enum Process {
    Lognormal { var: f64 },
    Heston { p: HestonParams, v: f64 },
    Gjr { omega: f64, alpha: f64, beta: f64, gamma: f64, h: f64 },
}

impl Process {
    fn new(world: &World) -> Self {
        match *world {
            World::Lognormal { sigma } => Process::Lognormal { var: sigma * sigma },
            World::Heston { params } => Process::Heston { p: params, v: params.v0 },
            World::Gjr { omega, alpha, beta, gamma } => {
                let h = omega / (1.0 - alpha - beta - 0.5 * gamma);
                Process::Gjr { omega, alpha, beta, gamma, h }
            }
        }
    }

    /// Advance one business day and return the log-price change.
    fn step(&mut self, s: &Step, day_years: f64) -> f64 {
        let dt = day_years / SUBSTEPS as f64;
        match self {
            Process::Lognormal { var } => {
                (0..SUBSTEPS).map(|i| -0.5 * *var * dt + (*var * dt).sqrt() * s.z1[i]).sum()
            }
            Process::Heston { p, v } => {
                let mut x = 0.0;
                let rho_c = (1.0 - p.rho * p.rho).max(0.0).sqrt();
                for i in 0..SUBSTEPS {
                    // full truncation Euler
                    let vp = v.max(0.0);
                    x += -0.5 * vp * dt + (vp * dt).sqrt() * s.z1[i];
                    let zv = p.rho * s.z1[i] + rho_c * s.z2[i];
                    *v += p.a * (p.vbar - vp) * dt + p.eta * (vp * dt).sqrt() * zv;
                }
                x
            }
            Process::Gjr { omega, alpha, beta, gamma, h } => {
                let z = s.z1.iter().sum::<f64>() / (SUBSTEPS as f64).sqrt();
                let e = h.sqrt() * z;
                let r = -0.5 * *h + e;
                let lev = if e < 0.0 { *gamma } else { 0.0 };
                *h = *omega + (*alpha + lev) * e * e + *beta * *h;
                r
            }
        }
    }

    fn state(&self, business_days: usize, sigma_lognormal: f64) -> TrueState {
        match *self {
            Process::Lognormal { .. } => TrueState::Lognormal { sigma: sigma_lognormal },
            Process::Heston { p, v } => TrueState::Heston { params: HestonParams { v0: v.max(MIN_STATE_VARIANCE), ..p } },
            Process::Gjr { omega, alpha, beta, gamma, h } => {
                let persistence = alpha + beta + 0.5 * gamma;
                let long_run = omega / (1.0 - persistence);
                let integrated: f64 =
                    (0..business_days).map(|k| long_run + persistence.powi(k as i32) * (h - long_run)).sum();
                TrueState::Gjr { next_variance: h, expected_integrated_variance: integrated }
            }
        }
    }
}

/// Horizon volatility used to price and to place strikes.
fn horizon_vol(state: &TrueState) -> f64 {
    match *state {
        TrueState::Lognormal { sigma } => sigma,
        TrueState::Heston { params } => params.v0.max(params.vbar).sqrt(),
        TrueState::Gjr { expected_integrated_variance, .. } => (expected_integrated_variance / HORIZON_YEARS).sqrt(),
    }
}

fn quote_chain(cfg: &SynthConfig, cycle: &CycleTruth) -> Result<OptionChain, MarketError> {
    let f = cycle.futures;
    let tau = HORIZON_YEARS;
    let df = discount_factor(cfg.rate, HORIZON_DAYS);
    let r = -df.ln() / tau;
    let sd = horizon_vol(&cycle.state) * tau.sqrt();
    // strike spacing and the quoting threshold follow the price level
    let level = f / cfg.initial_price;
    let step = ((cfg.strike_step * level) / cfg.tick).round().max(1.0) * cfg.tick;
    let min_price = cfg.min_price * level;
    let lo = ((f * (-6.0 * sd).exp()) / step).floor().max(1.0) * step;
    let hi = ((f * (6.0 * sd).exp()) / step).ceil() * step;
    let n = ((hi - lo) / step).round() as usize + 1;
    let strikes: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let calls: Vec<f64> = match cycle.state {
        TrueState::Heston { params } => {
            let cf = CharacteristicFunction::new(Dynamics::Heston(params), f, tau)
                .map_err(|e| MarketError::InvalidWorld(e.to_string()))?;
            cf_call_prices(&cf, &strikes, r, tau).map_err(|e| MarketError::InvalidWorld(e.to_string()))?
        }
        ref s => {
            let vol = horizon_vol(s);
            strikes.iter().map(|&k| black76_price(f, k, r, tau, vol, OptionKind::Call)).collect()
        }
    };
    let mut quotes = Vec::new();
    for (&k, &c) in strikes.iter().zip(&calls) {
        let (kind, mid) = if k >= f { (OptionKind::Call, c) } else { (OptionKind::Put, c - df * (f - k)) };
        if !(mid >= min_price) {
            continue;
        }
        let half = (cfg.rel_half_spread * mid).max(cfg.tick);
        quotes.push(OptionQuote { strike: k, kind, bid: mid - half, ask: mid + half });
    }
    Ok(OptionChain { obs_date: cycle.obs_date, expiry: cycle.expiry, quotes })
}

/// Simulate a synthetic dataset. A pure function of the configuration.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset, MarketError> {
    cfg.validate()?;
    let cal = BusinessCalendar::default();
    let day_years = HORIZON_YEARS / BUSINESS_DAYS_PER_HORIZON;
    let mut start = cfg.start;
    if !cal.is_business_day(start) {
        start = cal.next_business_day(start);
    }
    let mut warm_end = start;
    for _ in 0..cfg.warmup_days {
        warm_end = cal.next_business_day(warm_end);
    }
    let expiries = expiries_after(warm_end, cfg.n_cycles);
    let last = *expiries.last().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x5157_4e54]));
    let mut process = Process::new(&cfg.world);
    let sigma_ln = match cfg.world {
        World::Lognormal { sigma } => sigma,
        _ => 0.0,
    };

    let mut bars = vec![FuturesBar { date: start, settle: cfg.initial_price }];
    let mut states = std::collections::BTreeMap::new();
    let obs_dates: std::collections::BTreeSet<NaiveDate> =
        expiries.iter().map(|e| *e - Duration::days(HORIZON_DAYS)).collect();
    let mut log_price = cfg.initial_price.ln();
    let mut d = start;
    while d < last {
        if obs_dates.contains(&d) {
            let days = cal.count_between(d, d + Duration::days(HORIZON_DAYS));
            states.insert(d, process.state(days, sigma_ln));
        }
        d = cal.next_business_day(d);
        let s = draw_step(&mut rng);
        log_price += process.step(&s, day_years);
        bars.push(FuturesBar { date: d, settle: log_price.exp() });
    }
    let history = PriceHistory::new(bars)?;

    let mut cycles = Vec::with_capacity(expiries.len());
    for e in &expiries {
        let obs = *e - Duration::days(HORIZON_DAYS);
        let futures = history.settle_on(obs).ok_or(MarketError::InvalidWorld(format!("no price on {obs}")))?;
        let realization = history.settle_on(*e).ok_or(MarketError::InvalidWorld(format!("no price on {e}")))?;
        cycles.push(CycleTruth {
            obs_date: obs,
            expiry: *e,
            futures,
            realization,
            business_days: cal.count_between(obs, *e),
            state: states[&obs],
        });
    }
    let chains = cycles.iter().map(|c| quote_chain(cfg, c)).collect::<Result<Vec<_>, _>>()?;
    let rates = RateCurve::constant(start, cfg.rate);
    Ok(SynthDataset {
        history,
        rates,
        chains,
        truth: Truth { config: cfg.clone(), horizon_years: HORIZON_YEARS, cycles },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::CrossSection;
    use crate::pricing::black76_implied_vol;

    fn small(world: World, cycles: usize, seed: u64) -> SynthConfig {
        SynthConfig { warmup_days: 30, ..SynthConfig::new(world, cycles, seed) }
    }

    #[test]
    fn lognormal_surface_is_flat() {
        let ds = synth_generate(&small(World::Lognormal { sigma: 0.2 }, 60, 7)).unwrap();
        assert_eq!(ds.chains.len(), 60);
        for (chain, cyc) in ds.chains.iter().zip(&ds.truth.cycles) {
            let rate = ds.rates.rate_on(chain.obs_date).unwrap();
            let (cs, _) = CrossSection::from_chain(chain, cyc.futures, rate).unwrap();
            for q in &cs.quotes {
                let iv = black76_implied_vol(q.mid, cs.futures, q.strike, cs.cont_rate(), cs.tau(), OptionKind::Call)
                    .unwrap();
                assert!((iv - 0.2).abs() < 1e-6, "{iv} at {}", q.strike);
            }
            assert_eq!(cs.quotes.len(), chain.quotes.len());
        }
    }

    #[test]
    fn cycles_are_ex_ante_and_disjoint() {
        let ds = synth_generate(&small(World::Lognormal { sigma: 0.2 }, 24, 1)).unwrap();
        for w in ds.truth.cycles.windows(2) {
            assert!(w[0].expiry <= w[1].obs_date);
        }
        for c in &ds.truth.cycles {
            assert_eq!((c.expiry - c.obs_date).num_days(), 28);
            assert_eq!(c.business_days, 20);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = small(World::Heston { params: HestonParams { a: 2.0, vbar: 0.04, eta: 0.5, rho: -0.7, v0: 0.04 } }, 6, 3);
        let a = synth_generate(&cfg).unwrap();
        let b = synth_generate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heston_without_vol_of_vol_is_lognormal() {
        let h = HestonParams { a: 1.5, vbar: 0.04, eta: 0.0, rho: -0.5, v0: 0.04 };
        let a = synth_generate(&small(World::Heston { params: h }, 5, 11)).unwrap();
        let b = synth_generate(&small(World::Lognormal { sigma: 0.2 }, 5, 11)).unwrap();
        for (x, y) in a.history.bars().iter().zip(b.history.bars()) {
            assert!((x.settle / y.settle - 1.0).abs() < 1e-9);
        }
        for (x, y) in a.chains.iter().zip(&b.chains) {
            assert_eq!(x.quotes.len(), y.quotes.len());
            for (p, q) in x.quotes.iter().zip(&y.quotes) {
                assert!((p.mid() - q.mid()).abs() < 1e-6 * q.mid().max(1.0), "{} vs {}", p.mid(), q.mid());
            }
        }
    }

    #[test]
    fn gjr_world_and_bad_params() {
        let w = World::Gjr { omega: 3e-6, alpha: 0.03, beta: 0.9, gamma: 0.1 };
        let ds = synth_generate(&small(w, 4, 2)).unwrap();
        assert!(ds.chains.iter().all(|c| c.quotes.len() >= 8));
        assert!(synth_generate(&small(World::Lognormal { sigma: -0.1 }, 4, 2)).is_err());
        assert!(synth_generate(&small(World::Gjr { omega: 1e-6, alpha: 0.2, beta: 0.9, gamma: 0.0 }, 4, 2)).is_err());
        assert!(synth_generate(&small(World::Lognormal { sigma: 0.2 }, 0, 2)).is_err());
    }
}
