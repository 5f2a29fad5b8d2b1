//! Ensemble statistics per model and the CSV/JSON report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::run::{AuditRecord, BacktestOutput};
use super::{BacktestConfig, BacktestError, ModelId};
use crate::evaluation::{
    berkowitz_lr3, jarque_bera, ks_normal, score_table, tpit_summary, IfsInputs, IfsRow, PitSequence, TestResult,
    TpitSummary, MIN_TEST_LENGTH,
};
use crate::stats::mean;

pub const PIT_BINS: usize = 20;

/// A score over the first sub-period, the second and the whole sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubSample {
    pub first: Option<f64>,
    pub second: Option<f64>,
    pub entire: f64,
}

impl SubSample {
    fn minus(&self, other: &SubSample) -> SubSample {
        let d = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
        SubSample { first: d(self.first, other.first), second: d(self.second, other.second), entire: self.entire - other.entire }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelId,
    pub evaluated: usize,
    pub excluded: usize,
    pub pit_histogram: Vec<usize>,
    pub tpit: Option<TpitSummary>,
    pub berkowitz: Option<TestResult>,
    pub jarque_bera: Option<TestResult>,
    pub ks: Option<TestResult>,
    /// Summed log density.
    pub loglik: Option<SubSample>,
    /// Mean return-based CRPS.
    pub crps: Option<SubSample>,
    pub excess_loglik: Option<SubSample>,
    pub excess_crps: Option<SubSample>,
    pub ifs: Option<IfsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub cycles: usize,
    pub alpha: f64,
    pub split_date: Option<NaiveDate>,
    pub benchmark: Option<ModelId>,
    /// True when the usual benchmark was unavailable and another model stood in.
    pub benchmark_fallback: bool,
    pub models: Vec<ModelReport>,
    pub diagnostics: Vec<String>,
}

fn subsample(records: &[&AuditRecord], split: Option<NaiveDate>, value: impl Fn(&AuditRecord) -> f64, sum: bool) -> SubSample {
    let agg = |xs: Vec<f64>| -> Option<f64> {
        if xs.is_empty() {
            None
        } else if sum {
            Some(xs.iter().sum())
        } else {
            Some(mean(&xs))
        }
    };
    let all: Vec<f64> = records.iter().map(|r| value(r)).collect();
    let (first, second) = match split {
        None => (None, None),
        Some(s) => (
            agg(records.iter().filter(|r| r.obs_date < s).map(|r| value(r)).collect()),
            agg(records.iter().filter(|r| r.obs_date >= s).map(|r| value(r)).collect()),
        ),
    };
    SubSample { first, second, entire: agg(all).unwrap_or(f64::NAN) }
}

impl ScoreBoard {
    pub fn assemble(
        config: &BacktestConfig,
        cycles: usize,
        audit: &[AuditRecord],
        mut diagnostics: Vec<String>,
    ) -> Result<Self, BacktestError> {
        let mut models = Vec::new();
        for &model in &config.roster {
            let ok: Vec<&AuditRecord> = audit.iter().filter(|r| r.model == model && r.is_ok()).collect();
            let excluded = audit.iter().filter(|r| r.model == model && !r.is_ok()).count();
            if excluded > 0 {
                diagnostics.push(format!("{model}: {excluded} cycle(s) excluded"));
            }
            let mut seq = PitSequence::default();
            for r in &ok {
                seq.push(r.obs_date, r.pit.expect("scored record"));
            }
            let mut test = |name: &str, f: fn(&[f64]) -> Result<TestResult, _>| match f(&seq.tpits) {
                Ok(t) => Some(t),
                Err(e) => {
                    diagnostics.push(format!("{model}: {name} test unavailable: {e}"));
                    None
                }
            };
            let berkowitz = test("Berkowitz", berkowitz_lr3);
            let jb = test("Jarque-Bera", jarque_bera);
            let ks = test("Kolmogorov-Smirnov", ks_normal);
            let scored = !ok.is_empty();
            models.push(ModelReport {
                model,
                evaluated: ok.len(),
                excluded,
                pit_histogram: seq.histogram(PIT_BINS),
                tpit: (seq.len() >= 2).then(|| tpit_summary(&seq.tpits)),
                berkowitz,
                jarque_bera: jb,
                ks,
                loglik: scored.then(|| subsample(&ok, config.split_date, |r| r.log_density.unwrap(), true)),
                crps: scored.then(|| subsample(&ok, config.split_date, |r| r.crps.unwrap(), false)),
                excess_loglik: None,
                excess_crps: None,
                ifs: None,
            });
        }

        let usual = models.iter().position(|m| m.model == ModelId::BENCHMARK && m.loglik.is_some());
        let bench = usual.or_else(|| models.iter().position(|m| m.loglik.is_some()));
        let benchmark_fallback = usual.is_none() && bench.is_some();
        if benchmark_fallback {
            diagnostics.push(format!("{} unavailable; excess scores are relative to {}", ModelId::BENCHMARK, models[bench.unwrap()].model));
        }
        if let Some(b) = bench {
            let (bl, bc) = (models[b].loglik.unwrap(), models[b].crps.unwrap());
            for m in &mut models {
                m.excess_loglik = m.loglik.map(|l| l.minus(&bl));
                m.excess_crps = m.crps.map(|c| c.minus(&bc));
            }
        }

        // the IFS ranks the models with a complete set of statistics
        let complete: Vec<usize> = (0..models.len())
            .filter(|&i| {
                let m = &models[i];
                m.berkowitz.is_some() && m.jarque_bera.is_some() && m.ks.is_some() && m.loglik.is_some()
            })
            .collect();
        if complete.len() < models.len() {
            diagnostics.push(format!(
                "IFS computed for {} of {} models (tests need at least {MIN_TEST_LENGTH} scored cycles)",
                complete.len(),
                models.len()
            ));
        }
        if !complete.is_empty() {
            let inputs: Vec<IfsInputs> = complete
                .iter()
                .map(|&i| {
                    let m = &models[i];
                    IfsInputs {
                        model: m.model.to_string(),
                        berkowitz_p: m.berkowitz.as_ref().unwrap().p_value,
                        jb_p: m.jarque_bera.as_ref().unwrap().p_value,
                        ks_p: m.ks.as_ref().unwrap().p_value,
                        loglik: m.loglik.unwrap().entire,
                        crps: m.crps.unwrap().entire,
                    }
                })
                .collect();
            let rows = score_table(&inputs, config.alpha)?;
            for (i, row) in complete.into_iter().zip(rows) {
                models[i].ifs = Some(row);
            }
        }
        Ok(Self {
            cycles,
            alpha: config.alpha,
            split_date: config.split_date,
            benchmark: bench.map(|b| models[b].model),
            benchmark_fallback,
            models,
            diagnostics,
        })
    }

    pub fn model(&self, id: ModelId) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == id)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn pct(t: &Option<TestResult>) -> (String, String) {
    match t {
        Some(t) => (t.statistic.to_string(), (100.0 * t.p_value).to_string()),
        None => (String::new(), String::new()),
    }
}

/// Table of normalized scores and IFS, best IFS first.
pub fn write_ifs_csv<W: Write>(rows: &[IfsRow], writer: W) -> Result<(), BacktestError> {
    let mut sorted: Vec<&IfsRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.ifs_rank);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "model", "ifs", "ifs_rank", "consistency", "consistency_rank", "accuracy", "accuracy_rank", "errors", "errors_rank",
    ])?;
    for r in sorted {
        w.write_record([
            r.model.clone(),
            r.ifs.to_string(),
            r.ifs_rank.to_string(),
            r.consistency.to_string(),
            r.consistency_rank.to_string(),
            r.accuracy.to_string(),
            r.accuracy_rank.to_string(),
            r.errors.to_string(),
            r.errors_rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_file(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, BacktestError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
}

fn write_excess(
    dir: &Path,
    name: &str,
    board: &ScoreBoard,
    get: impl Fn(&ModelReport) -> (Option<SubSample>, Option<SubSample>),
) -> Result<(), BacktestError> {
    let bench = board.benchmark.map(|b| b.to_string()).unwrap_or_default();
    let mut w = csv_file(dir, name)?;
    let bench_col = if board.benchmark_fallback { "fallback_benchmark" } else { "benchmark" };
    w.write_record(["model", "first", "second", "entire", "absolute_entire", bench_col])?;
    for m in &board.models {
        let (abs, exc) = get(m);
        w.write_record([
            m.model.to_string(),
            opt(exc.and_then(|e| e.first)),
            opt(exc.and_then(|e| e.second)),
            opt(exc.map(|e| e.entire)),
            opt(abs.map(|a| a.entire)),
            bench.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `scoreboard.json`, `table2.csv` to `table6.csv`, `pit_hist.csv`,
/// `fans.csv` and `audit.jsonl` into `dir`; returns the file names.
pub fn write_reports(out: &BacktestOutput, dir: &Path) -> Result<Vec<String>, BacktestError> {
    std::fs::create_dir_all(dir)?;
    let board = &out.scoreboard;
    std::fs::write(dir.join("scoreboard.json"), serde_json::to_string_pretty(board)? + "\n")?;

    let mut w = csv_file(dir, "table2.csv")?;
    w.write_record([
        "model", "n", "excluded", "mu", "variance", "rho", "lr3", "berkowitz", "jb_stat", "jb", "ks_stat", "ks",
    ])?;
    for m in &board.models {
        let comp = |k: &str| opt(m.berkowitz.as_ref().and_then(|t| t.component(k)));
        let (lr3, bp) = pct(&m.berkowitz);
        let (jbs, jbp) = pct(&m.jarque_bera);
        let (kss, ksp) = pct(&m.ks);
        w.write_record([
            m.model.to_string(),
            m.evaluated.to_string(),
            m.excluded.to_string(),
            comp("mu"),
            comp("variance"),
            comp("rho"),
            lr3,
            bp,
            jbs,
            jbp,
            kss,
            ksp,
        ])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "table3.csv")?;
    w.write_record(["model", "mean", "p05", "median", "p95", "std", "skewness", "kurtosis", "ar1"])?;
    for m in &board.models {
        let s = m.tpit;
        let f = |g: fn(&TpitSummary) -> f64| opt(s.as_ref().map(g));
        w.write_record([
            m.model.to_string(),
            f(|s| s.mean),
            f(|s| s.p05),
            f(|s| s.median),
            f(|s| s.p95),
            f(|s| s.std),
            f(|s| s.skewness),
            f(|s| s.kurtosis),
            f(|s| s.ar1),
        ])?;
    }
    w.flush()?;

    write_excess(dir, "table4.csv", board, |m| (m.loglik, m.excess_loglik))?;
    write_excess(dir, "table5.csv", board, |m| (m.crps, m.excess_crps))?;
    let rows: Vec<IfsRow> = board.models.iter().filter_map(|m| m.ifs.clone()).collect();
    write_ifs_csv(&rows, BufWriter::new(File::create(dir.join("table6.csv"))?))?;

    let mut w = csv_file(dir, "pit_hist.csv")?;
    w.write_record(["model", "bin_lo", "bin_hi", "count"])?;
    for m in &board.models {
        let n = m.pit_histogram.len();
        for (i, c) in m.pit_histogram.iter().enumerate() {
            w.write_record([m.model.to_string(), (i as f64 / n as f64).to_string(), ((i + 1) as f64 / n as f64).to_string(), c.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv_file(dir, "fans.csv")?;
    w.write_record(["obs_date", "expiry", "model", "futures", "realization", "q05", "q25", "q50", "q75", "q95"])?;
    for r in out.audit.iter().filter(|r| r.is_ok()) {
        let mut rec = vec![r.obs_date.to_string(), r.expiry.to_string(), r.model.to_string(), r.futures.to_string(), r.realization.to_string()];
        rec.extend(r.quantiles.iter().flatten().map(|q| (r.futures * q.exp()).to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;

    let mut f = BufWriter::new(File::create(dir.join("audit.jsonl"))?);
    for r in &out.audit {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;

    Ok(["scoreboard.json", "table2.csv", "table3.csv", "table4.csv", "table5.csv", "table6.csv", "pit_hist.csv", "fans.csv", "audit.jsonl"]
        .map(String::from)
        .to_vec())
}
