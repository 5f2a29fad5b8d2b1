//! The ex-ante experiment: monthly cycles, per-cycle calibration of every
//! scheme on information available at the observation date, and the
//! ensemble evaluation of the resulting densities.

pub mod report;
pub mod run;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{write_reports, ModelReport, ScoreBoard};
pub use run::{run_backtest, AuditRecord, BacktestOutput};

use crate::density::LogReturnGrid;
use crate::evaluation::EvalError;
use crate::histmodels::WindowLabel;
use crate::marketdata::calendar::BusinessCalendar;
pub use crate::marketdata::synth::HORIZON_DAYS;
use crate::marketdata::{CrossSection, MarketData, MarketError};
use crate::rndmodels::SreOptions;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{model} needs {needed} returns before {obs_date}, history has {available}")]
    WindowInfeasible { obs_date: NaiveDate, model: ModelId, needed: usize, available: usize },
    #[error("no futures settlement on observation date {0}")]
    MissingFutures(NaiveDate),
    #[error("no cycle survived scheduling")]
    NoCycles,
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One of the fifteen density schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelId {
    LnHis(WindowLabel),
    Bts(WindowLabel),
    GarchN(WindowLabel),
    GarchT(WindowLabel),
    GjrFhs(WindowLabel),
    LnAtm,
    Heston,
    Bates,
    Vg,
    BlMalz,
}

impl ModelId {
    pub const ALL: [ModelId; 15] = [
        ModelId::LnHis(WindowLabel::SixMonths),
        ModelId::Bts(WindowLabel::SixMonths),
        ModelId::GarchN(WindowLabel::SixMonths),
        ModelId::GarchT(WindowLabel::SixMonths),
        ModelId::GjrFhs(WindowLabel::SixMonths),
        ModelId::LnHis(WindowLabel::FiveYears),
        ModelId::Bts(WindowLabel::FiveYears),
        ModelId::GarchN(WindowLabel::FiveYears),
        ModelId::GarchT(WindowLabel::FiveYears),
        ModelId::GjrFhs(WindowLabel::FiveYears),
        ModelId::LnAtm,
        ModelId::Heston,
        ModelId::Bates,
        ModelId::Vg,
        ModelId::BlMalz,
    ];

    pub const BENCHMARK: ModelId = ModelId::LnHis(WindowLabel::SixMonths);

    pub fn window(self) -> Option<WindowLabel> {
        match self {
            ModelId::LnHis(w) | ModelId::Bts(w) | ModelId::GarchN(w) | ModelId::GarchT(w) | ModelId::GjrFhs(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_historical(self) -> bool {
        self.window().is_some()
    }

    /// Stable numeric id used to derive RNG streams.
    pub fn code(self) -> u64 {
        ModelId::ALL.iter().position(|m| *m == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let with = |f: &mut fmt::Formatter<'_>, stem: &str, w: &WindowLabel| write!(f, "{stem}({})", w.tag());
        match self {
            ModelId::LnHis(w) => with(f, "LN-HIS", w),
            ModelId::Bts(w) => with(f, "BTS", w),
            ModelId::GarchN(w) => with(f, "GARCH-N", w),
            ModelId::GarchT(w) => with(f, "GARCH-t", w),
            ModelId::GjrFhs(w) => with(f, "GJR-FHS", w),
            ModelId::LnAtm => f.write_str("LN-ATM"),
            ModelId::Heston => f.write_str("HESTON"),
            ModelId::Bates => f.write_str("BATES"),
            ModelId::Vg => f.write_str("VG"),
            ModelId::BlMalz => f.write_str("BL-MALZ"),
        }
    }
}

impl FromStr for ModelId {
    type Err = BacktestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().to_ascii_uppercase().chars().filter(|c| !c.is_whitespace()).collect();
        ModelId::ALL
            .into_iter()
            .find(|m| m.to_string().to_ascii_uppercase() == key)
            .ok_or_else(|| BacktestError::Config(format!("unknown model {s:?}")))
    }
}

impl From<ModelId> for String {
    fn from(m: ModelId) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ModelId {
    type Error = BacktestError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub roster: Vec<ModelId>,
    /// Business days in the short and long calibration windows.
    pub window_days: [usize; 2],
    pub n_paths: usize,
    pub seed: u64,
    pub grid: LogReturnGrid,
    pub alpha: f64,
    /// Cycles observed before this date form the first sub-period.
    pub split_date: Option<NaiveDate>,
    pub holidays: Vec<NaiveDate>,
    pub sre: SreOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            roster: ModelId::ALL.to_vec(),
            window_days: [WindowLabel::SixMonths.days(), WindowLabel::FiveYears.days()],
            n_paths: 100_000,
            seed: 0,
            grid: LogReturnGrid::default(),
            alpha: 0.05,
            split_date: NaiveDate::from_ymd_opt(2007, 1, 1),
            holidays: Vec::new(),
            sre: SreOptions::default(),
        }
    }
}

impl BacktestConfig {
    pub fn window_len(&self, label: WindowLabel) -> usize {
        match label {
            WindowLabel::SixMonths => self.window_days[0],
            WindowLabel::FiveYears => self.window_days[1],
        }
    }

    /// Every problem found, so they can be reported together.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.roster.is_empty() {
            out.push("roster is empty".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.roster {
            if !seen.insert(*m) {
                out.push(format!("model {m} listed twice"));
            }
        }
        if self.n_paths < crate::histmodels::MIN_PATHS {
            out.push(format!("n_paths must be at least {}", crate::histmodels::MIN_PATHS));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push("alpha must lie in (0, 1)".to_string());
        }
        if self.window_days.iter().any(|d| *d < crate::histmodels::MIN_WINDOW) {
            out.push(format!("windows must hold at least {} returns", crate::histmodels::MIN_WINDOW));
        }
        let g = &self.grid;
        if !(g.lo < 0.0 && g.hi > 0.0 && g.n >= 101) {
            out.push("grid must straddle zero with at least 101 points".to_string());
        }
        if self.sre.starts == 0 {
            out.push("sre_starts must be positive".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(BacktestError::Config(p.join("; ")))
        }
    }
}

/// One forecasting cycle: observation date, expiry and what is known about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub obs_date: NaiveDate,
    pub expiry: NaiveDate,
    pub tau_calendar: i64,
    pub tau_business: usize,
    pub futures: f64,
    pub realization: f64,
    /// Filtered options, absent when the chain was missing or unusable.
    pub cross_section: Option<CrossSection>,
}

/// Monthly cycles observed 28 calendar days before each expiry. Cycles whose
/// realization is not yet in the history, or which would overlap the
/// previous cycle, are dropped with a diagnostic.
pub fn build_schedule(
    expiries: &[NaiveDate],
    data: &MarketData,
    calendar: &BusinessCalendar,
) -> Result<(Vec<Cycle>, Vec<String>), BacktestError> {
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut sorted = expiries.to_vec();
    sorted.sort();
    sorted.dedup();
    for expiry in sorted {
        let obs_date = expiry - Duration::days(HORIZON_DAYS);
        let Some(realization) = data.history.settle_on(expiry) else {
            diagnostics.push(format!("cycle {obs_date}..{expiry} dropped: no settlement at expiry"));
            continue;
        };
        if let Some(prev) = cycles.last() {
            if obs_date < prev.expiry {
                diagnostics.push(format!("cycle {obs_date}..{expiry} dropped: overlaps cycle ending {}", prev.expiry));
                continue;
            }
        }
        let futures = data.history.settle_on(obs_date).ok_or(BacktestError::MissingFutures(obs_date))?;
        let cross_section = match data.chains.iter().find(|c| c.obs_date == obs_date && c.expiry == expiry) {
            None => {
                diagnostics.push(format!("cycle {obs_date}..{expiry}: no option chain"));
                None
            }
            Some(chain) => match data.rates.rate_on(obs_date).and_then(|r| CrossSection::from_chain(chain, futures, r)) {
                Ok((cs, _)) => Some(cs),
                Err(e) => {
                    diagnostics.push(format!("cycle {obs_date}..{expiry}: options unusable: {e}"));
                    None
                }
            },
        };
        cycles.push(Cycle {
            obs_date,
            expiry,
            tau_calendar: HORIZON_DAYS,
            tau_business: calendar.count_between(obs_date, expiry),
            futures,
            realization,
            cross_section,
        });
    }
    Ok((cycles, diagnostics))
}

/// Expiries to schedule: those of the option chains observed exactly 28 days
/// earlier.
pub fn chain_expiries(data: &MarketData) -> Vec<NaiveDate> {
    let mut out: Vec<NaiveDate> = data
        .chains
        .iter()
        .filter(|c| (c.expiry - c.obs_date).num_days() == HORIZON_DAYS)
        .map(|c| c.expiry)
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Returns available strictly before and including `date`.
pub(crate) fn returns_available(data: &MarketData, date: NaiveDate) -> usize {
    data.history.bars().partition_point(|b| b.date <= date).saturating_sub(1)
}

/// Check every historical window fits; names the first infeasible cycle.
pub fn check_windows(config: &BacktestConfig, cycles: &[Cycle], data: &MarketData) -> Result<(), BacktestError> {
    for c in cycles {
        let available = returns_available(data, c.obs_date);
        for m in &config.roster {
            if let Some(w) = m.window() {
                let needed = config.window_len(w);
                if available < needed {
                    return Err(BacktestError::WindowInfeasible { obs_date: c.obs_date, model: *m, needed, available });
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn date_key(d: NaiveDate) -> u64 {
    d.num_days_from_ce() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{FuturesBar, PriceHistory, RateCurve};

    fn weekday_history(start: NaiveDate, days: i64) -> PriceHistory {
        let bars = (0..days)
            .map(|i| start + Duration::days(i))
            .filter(|d| d.weekday().number_from_monday() <= 5)
            .enumerate()
            .map(|(i, date)| FuturesBar { date, settle: 100.0 + (i % 7) as f64 })
            .collect();
        PriceHistory::new(bars).unwrap()
    }

    #[test]
    fn model_names_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.to_string().parse::<ModelId>().unwrap(), m);
        }
        assert_eq!("garch-t(5y)".parse::<ModelId>().unwrap(), ModelId::GarchT(WindowLabel::FiveYears));
        assert!("SABR".parse::<ModelId>().is_err());
        let json = serde_json::to_string(&ModelId::BlMalz).unwrap();
        assert_eq!(json, "\"BL-MALZ\"");
    }

    #[test]
    fn schedule_rules() {
        let start = NaiveDate::from_ymd_opt(2016, 10, 3).unwrap();
        let history = weekday_history(start, 120);
        let rates = RateCurve::constant(start, 0.01);
        let data = MarketData { history, rates, chains: vec![] };
        let cal = BusinessCalendar::new([]);
        let dec = NaiveDate::from_ymd_opt(2016, 12, 16).unwrap();
        let jan = NaiveDate::from_ymd_opt(2017, 1, 20).unwrap();
        let (cycles, diag) = build_schedule(&[jan, dec], &data, &cal).unwrap();
        assert_eq!(cycles.len(), 2);
        assert_eq!(cycles[0].obs_date, NaiveDate::from_ymd_opt(2016, 11, 18).unwrap());
        assert_eq!(cycles[0].tau_business, 20);
        assert!(cycles[0].expiry <= cycles[1].obs_date);
        assert!(cycles.iter().all(|c| c.cross_section.is_none()));
        assert_eq!(diag.len(), 2);

        // an expiry one week after another overlaps it
        let (cycles, diag) = build_schedule(&[dec, dec + Duration::days(7)], &data, &cal).unwrap();
        assert_eq!(cycles.len(), 1);
        assert!(diag.iter().any(|d| d.contains("overlaps")));
    }

    #[test]
    fn config_problems_are_enumerated() {
        let cfg = BacktestConfig { roster: vec![], n_paths: 10, alpha: 2.0, ..Default::default() };
        assert_eq!(cfg.problems().len(), 3);
        assert!(BacktestConfig::default().validate().is_ok());
    }
}
