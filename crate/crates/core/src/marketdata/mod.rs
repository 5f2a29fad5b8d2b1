//! Market inputs: futures settlement histories, short rates and option
//! cross-sections, plus the arbitrage filter and a synthetic data generator.

pub mod calendar;
pub mod filter;
pub mod synth;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub use calendar::{third_friday, BusinessCalendar};
pub use filter::{
    enforce_shape, filter_cross_section, moneyness_bucket, put_to_call, shape_violations, FilterOutcome, Moneyness,
    MoneynessTable,
};
pub use synth::{synth_generate, SynthConfig, SynthDataset, World};

use crate::pricing::OptionKind;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("empty history")]
    EmptyHistory,
    #[error("non-positive settle {value} on {date}")]
    NonPositivePrice { date: NaiveDate, value: f64 },
    #[error("duplicate date {date} with conflicting values {first} and {second}")]
    DuplicateDate { date: NaiveDate, first: f64, second: f64 },
    #[error("invalid row {row}: {msg}")]
    InvalidRow { row: usize, msg: String },
    #[error("insufficient quotes: {survivors} survive the filter, at least {required} required")]
    InsufficientQuotes { survivors: usize, required: usize },
    #[error("put at strike {strike} converts to a negative call price {value}")]
    NegativeCall { strike: f64, value: f64 },
    #[error("invalid world parameters: {0}")]
    InvalidWorld(String),
    #[error("no rate quote on or before {0}")]
    MissingRate(NaiveDate),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuturesBar {
    pub date: NaiveDate,
    pub settle: f64,
}

/// Futures settlement prices, sorted by date with no duplicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceHistory {
    bars: Vec<FuturesBar>,
}

impl PriceHistory {
    /// Sorts, drops exact duplicate rows and rejects conflicting ones.
    pub fn new(mut bars: Vec<FuturesBar>) -> Result<Self, MarketError> {
        if bars.is_empty() {
            return Err(MarketError::EmptyHistory);
        }
        if let Some(b) = bars.iter().find(|b| !(b.settle > 0.0) || !b.settle.is_finite()) {
            return Err(MarketError::NonPositivePrice { date: b.date, value: b.settle });
        }
        bars.sort_by_key(|b| b.date);
        let mut out: Vec<FuturesBar> = Vec::with_capacity(bars.len());
        for b in bars {
            match out.last() {
                Some(last) if last.date == b.date => {
                    if last.settle != b.settle {
                        return Err(MarketError::DuplicateDate { date: b.date, first: last.settle, second: b.settle });
                    }
                }
                _ => out.push(b),
            }
        }
        Ok(Self { bars: out })
    }

    pub fn bars(&self) -> &[FuturesBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.bars[0].date
    }

    pub fn last_date(&self) -> NaiveDate {
        self.bars[self.bars.len() - 1].date
    }

    pub fn settle_on(&self, date: NaiveDate) -> Option<f64> {
        self.bars.binary_search_by_key(&date, |b| b.date).ok().map(|i| self.bars[i].settle)
    }

    /// Log-returns between consecutive bars; element `i` is dated at bar `i + 1`.
    pub fn log_returns(&self) -> Vec<(NaiveDate, f64)> {
        self.bars.windows(2).map(|w| (w[1].date, (w[1].settle / w[0].settle).ln())).collect()
    }

    /// The last `n` daily log-returns dated on or before `end`, or `None` if
    /// fewer are available.
    pub fn returns_until(&self, end: NaiveDate, n: usize) -> Option<Vec<f64>> {
        let upto = self.bars.partition_point(|b| b.date <= end);
        if upto < n + 1 {
            return None;
        }
        let slice = &self.bars[upto - n - 1..upto];
        Some(slice.windows(2).map(|w| (w[1].settle / w[0].settle).ln()).collect())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MarketError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut bars = Vec::new();
        for (i, rec) in rdr.deserialize::<FuturesBar>().enumerate() {
            let bar = rec.map_err(|e| MarketError::InvalidRow { row: i + 2, msg: e.to_string() })?;
            bars.push(bar);
        }
        Self::new(bars)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MarketError> {
        let mut w = csv::Writer::from_writer(writer);
        for b in &self.bars {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load a futures history CSV (`date,settle`).
pub fn load_futures_history(path: &Path) -> Result<PriceHistory, MarketError> {
    PriceHistory::read_csv(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuote {
    pub date: NaiveDate,
    /// Annualized simple rate, act/360.
    pub rate: f64,
}

/// Short-rate quotes, forward-filled between quote dates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    quotes: Vec<RateQuote>,
}

impl RateCurve {
    pub fn new(mut quotes: Vec<RateQuote>) -> Result<Self, MarketError> {
        for (i, q) in quotes.iter().enumerate() {
            if !q.rate.is_finite() {
                return Err(MarketError::InvalidRow { row: i + 2, msg: format!("non-finite rate on {}", q.date) });
            }
        }
        quotes.sort_by_key(|q| q.date);
        for w in quotes.windows(2) {
            if w[0].date == w[1].date && w[0].rate != w[1].rate {
                return Err(MarketError::DuplicateDate { date: w[0].date, first: w[0].rate, second: w[1].rate });
            }
        }
        quotes.dedup_by_key(|q| q.date);
        Ok(Self { quotes })
    }

    pub fn constant(date: NaiveDate, rate: f64) -> Self {
        Self { quotes: vec![RateQuote { date, rate }] }
    }

    pub fn quotes(&self) -> &[RateQuote] {
        &self.quotes
    }

    /// Most recent quote on or before `date`.
    pub fn rate_on(&self, date: NaiveDate) -> Result<f64, MarketError> {
        let i = self.quotes.partition_point(|q| q.date <= date);
        if i == 0 {
            return Err(MarketError::MissingRate(date));
        }
        Ok(self.quotes[i - 1].rate)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MarketError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut quotes = Vec::new();
        for (i, rec) in rdr.deserialize::<RateQuote>().enumerate() {
            quotes.push(rec.map_err(|e| MarketError::InvalidRow { row: i + 2, msg: e.to_string() })?);
        }
        Self::new(quotes)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MarketError> {
        let mut w = csv::Writer::from_writer(writer);
        for q in &self.quotes {
            w.serialize(q)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_rates(path: &Path) -> Result<RateCurve, MarketError> {
    RateCurve::read_csv(std::fs::File::open(path)?)
}

/// Discount factor for a simple act/360 rate over `days` calendar days.
pub fn discount_factor(simple_rate: f64, days: i64) -> f64 {
    1.0 / (1.0 + simple_rate * days as f64 / 360.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub kind: OptionKind,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    /// Both sides present, ordered, and a positive mid.
    pub fn is_admissible(&self) -> bool {
        self.strike > 0.0
            && self.bid.is_finite()
            && self.ask.is_finite()
            && self.bid >= 0.0
            && self.ask >= self.bid
            && self.mid() > 0.0
    }
}

/// All raw quotes for one observation date and expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub obs_date: NaiveDate,
    pub expiry: NaiveDate,
    pub quotes: Vec<OptionQuote>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptionRow {
    obs_date: NaiveDate,
    expiry: NaiveDate,
    strike: f64,
    kind: String,
    bid: f64,
    ask: f64,
}

/// Read an options CSV (`obs_date,expiry,strike,kind,bid,ask`, kind C or P)
/// into chains ordered by (obs_date, expiry).
pub fn read_option_chains<R: Read>(reader: R) -> Result<Vec<OptionChain>, MarketError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut map: BTreeMap<(NaiveDate, NaiveDate), Vec<OptionQuote>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<OptionRow>().enumerate() {
        let row = rec.map_err(|e| MarketError::InvalidRow { row: i + 2, msg: e.to_string() })?;
        let kind = match row.kind.as_str() {
            "C" | "c" => OptionKind::Call,
            "P" | "p" => OptionKind::Put,
            other => return Err(MarketError::InvalidRow { row: i + 2, msg: format!("unknown option kind {other:?}") }),
        };
        if row.expiry <= row.obs_date {
            return Err(MarketError::InvalidRow { row: i + 2, msg: "expiry must follow obs_date".into() });
        }
        map.entry((row.obs_date, row.expiry)).or_default().push(OptionQuote {
            strike: row.strike,
            kind,
            bid: row.bid,
            ask: row.ask,
        });
    }
    Ok(map.into_iter().map(|((obs_date, expiry), quotes)| OptionChain { obs_date, expiry, quotes }).collect())
}

pub fn write_option_chains<W: Write>(chains: &[OptionChain], writer: W) -> Result<(), MarketError> {
    let mut w = csv::Writer::from_writer(writer);
    for c in chains {
        for q in &c.quotes {
            w.serialize(OptionRow {
                obs_date: c.obs_date,
                expiry: c.expiry,
                strike: q.strike,
                kind: match q.kind {
                    OptionKind::Call => "C".into(),
                    OptionKind::Put => "P".into(),
                },
                bid: q.bid,
                ask: q.ask,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_option_chains(path: &Path) -> Result<Vec<OptionChain>, MarketError> {
    read_option_chains(std::fs::File::open(path)?)
}

/// A call-equivalent price at one strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallQuote {
    pub strike: f64,
    pub mid: f64,
    /// Kind of the quoted contract before parity conversion.
    pub source: OptionKind,
}

/// One observation date's filtered, call-equivalent option prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub obs_date: NaiveDate,
    pub expiry: NaiveDate,
    pub futures: f64,
    /// Simple act/360 rate for the period.
    pub rate: f64,
    /// Strictly increasing strikes.
    pub quotes: Vec<CallQuote>,
}

impl CrossSection {
    pub fn days(&self) -> i64 {
        (self.expiry - self.obs_date).num_days()
    }

    /// Calendar year fraction used for volatility.
    pub fn tau(&self) -> f64 {
        self.days() as f64 / 365.0
    }

    pub fn discount(&self) -> f64 {
        discount_factor(self.rate, self.days())
    }

    /// Continuously compounded rate over `tau()` with the same discount factor.
    pub fn cont_rate(&self) -> f64 {
        -self.discount().ln() / self.tau()
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q.strike).collect()
    }

    pub fn mids(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q.mid).collect()
    }

    /// Filter a raw chain into a cross-section.
    pub fn from_chain(chain: &OptionChain, futures: f64, rate: f64) -> Result<(Self, FilterOutcome), MarketError> {
        let days = (chain.expiry - chain.obs_date).num_days();
        let tau = days as f64 / 365.0;
        let r = -discount_factor(rate, days).ln() / tau;
        let outcome = filter_cross_section(&chain.quotes, futures, r, tau)?;
        let cs = Self { obs_date: chain.obs_date, expiry: chain.expiry, futures, rate, quotes: outcome.kept.clone() };
        Ok((cs, outcome))
    }
}

/// Everything a backtest reads.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub history: PriceHistory,
    pub rates: RateCurve,
    pub chains: Vec<OptionChain>,
}

impl MarketData {
    pub fn load(futures: &Path, rates: &Path, options: &Path) -> Result<Self, MarketError> {
        Ok(Self {
            history: load_futures_history(futures)?,
            rates: load_rates(rates)?,
            chains: load_option_chains(options)?,
        })
    }
}
