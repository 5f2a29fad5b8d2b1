//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad flags, config or
//! input data), 2 on runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backtest::{run_backtest, write_reports, BacktestConfig, BacktestError, ModelId};
use crate::density::LogReturnGrid;
use crate::evaluation::{score_table, IfsInputs};
use crate::marketdata::filter::MoneynessTable;
use crate::marketdata::{
    load_futures_history, load_option_chains, load_rates, synth_generate, CrossSection, MarketData, MarketError,
    SynthConfig, World,
};
use crate::pricing::HestonParams;

pub const THREADS_ENV: &str = "DENSITYBENCH_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Config(_)
            | BacktestError::WindowInfeasible { .. }
            | BacktestError::MissingFutures(_)
            | BacktestError::NoCycles => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "densitybench", version, about = "Ex-ante density forecasts for futures prices and their verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a known generating process.
    Synth(SynthArgs),
    /// Run the forecasting experiment and write the report files.
    Backtest(BacktestArgs),
    /// Normalized scores and IFS from per-model p-value, log-likelihood and CRPS tables.
    ScoreTables(ScoreArgs),
    /// Load and check input data without running any model.
    ValidateData(DataArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// lognormal, heston or gjr.
    #[arg(long, default_value = "lognormal")]
    world: String,
    #[arg(long, default_value_t = 60)]
    cycles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// World parameter override, e.g. `sigma=0.25` or `rho=-0.5`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Business days simulated before the first observation date.
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    /// Directory holding futures.csv, rates.csv and (optionally) options.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    futures: Option<PathBuf>,
    #[arg(long)]
    rates: Option<PathBuf>,
    #[arg(long)]
    options: Option<PathBuf>,
    /// Output directory (report files for backtest, table1.csv for validate-data).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    /// Flat key=value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated model names.
    #[arg(long)]
    roster: Option<String>,
    #[arg(long)]
    window_short: Option<usize>,
    #[arg(long)]
    window_long: Option<usize>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// ISO date, or `none` for no sub-period split.
    #[arg(long)]
    split_date: Option<String>,
    /// Any configuration key, e.g. `--set grid_n=2001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Per-model Berkowitz, JB and KS p-values in percent.
    #[arg(long)]
    p_values: PathBuf,
    /// Per-model entire-sample log-likelihood (absolute or excess).
    #[arg(long)]
    loglik: PathBuf,
    /// Per-model entire-sample CRPS (absolute or excess).
    #[arg(long)]
    crps: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Backtest(a) => cmd_backtest(&a),
        Command::ScoreTables(a) => cmd_score_tables(&a),
        Command::ValidateData(a) => cmd_validate_data(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a pool built earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Value,
    pub config_digest: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: Value) -> Result<Self, CliError> {
        let canonical = serde_json::to_vec(&config).map_err(runtime)?;
        Ok(Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_digest: hex::encode(Sha256::digest(&canonical)),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: Utc::now().to_rfc3339(),
            finished: String::new(),
        })
    }

    fn finish(mut self, dir: &Path, outputs: &[String]) -> Result<(), CliError> {
        for name in outputs {
            self.outputs.insert(name.clone(), sha256_file(&dir.join(name))?);
        }
        self.finished = Utc::now().to_rfc3339();
        let text = serde_json::to_string_pretty(&self).map_err(runtime)? + "\n";
        std::fs::write(dir.join("manifest.json"), text).map_err(runtime)
    }
}

fn split_kv(s: &str) -> Result<(String, String), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Validation(format!("expected KEY=VALUE, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

// ---------------------------------------------------------------- synth

fn world_from(name: &str, params: &[String]) -> Result<World, CliError> {
    let mut kv = BTreeMap::new();
    for p in params {
        let (k, v) = split_kv(p)?;
        let x: f64 = v.parse().map_err(|_| CliError::Validation(format!("parameter {k}: {v:?} is not a number")))?;
        kv.insert(k, x);
    }
    let mut take = |k: &str, default: f64| kv.remove(k).unwrap_or(default);
    let world = match name.to_ascii_lowercase().as_str() {
        "lognormal" => World::Lognormal { sigma: take("sigma", 0.2) },
        "heston" => World::Heston {
            params: HestonParams {
                a: take("a", 2.0),
                vbar: take("vbar", 0.04),
                eta: take("eta", 0.4),
                rho: take("rho", -0.6),
                v0: take("v0", 0.04),
            },
        },
        "gjr" => World::Gjr {
            omega: take("omega", 2e-6),
            alpha: take("alpha", 0.05),
            beta: take("beta", 0.9),
            gamma: take("gamma", 0.08),
        },
        other => return Err(CliError::Validation(format!("unknown world {other:?} (lognormal, heston, gjr)"))),
    };
    if let Some(k) = kv.keys().next() {
        return Err(CliError::Validation(format!("parameter {k:?} does not apply to the {name} world")));
    }
    Ok(world)
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.cycles == 0 {
        return Err(CliError::Validation("--cycles must be at least 1".into()));
    }
    let mut cfg = SynthConfig::new(world_from(&a.world, &a.params)?, a.cycles, a.seed);
    if let Some(w) = a.warmup {
        cfg.warmup_days = w;
    }
    cfg.validate().map_err(invalid)?;
    let manifest = RunManifest::new("synth", a.seed, serde_json::to_value(&cfg).map_err(runtime)?)?;
    let ds = synth_generate(&cfg).map_err(runtime)?;
    ds.write_dir(&a.out).map_err(runtime)?;
    let files: Vec<String> = ["futures.csv", "rates.csv", "options.csv", "truth.json"].map(String::from).to_vec();
    manifest.finish(&a.out, &files)?;
    println!("wrote {} cycles to {}", ds.truth.cycles.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- data

struct DataPaths {
    futures: PathBuf,
    rates: PathBuf,
    options: Option<PathBuf>,
}

fn data_paths(data: Option<&Path>, futures: Option<&Path>, rates: Option<&Path>, options: Option<&Path>) -> Result<DataPaths, CliError> {
    let pick = |explicit: Option<&Path>, name: &str| explicit.map(Path::to_path_buf).or_else(|| data.map(|d| d.join(name)));
    let futures = pick(futures, "futures.csv").ok_or_else(|| CliError::Validation("no futures data (--data or --futures)".into()))?;
    let rates = pick(rates, "rates.csv").ok_or_else(|| CliError::Validation("no rate data (--data or --rates)".into()))?;
    // options are optional when only a data directory is given
    let options = match options {
        Some(p) => Some(p.to_path_buf()),
        None => data.map(|d| d.join("options.csv")).filter(|p| p.exists()),
    };
    Ok(DataPaths { futures, rates, options })
}

fn load_data(paths: &DataPaths) -> Result<MarketData, CliError> {
    let ctx = |p: &Path, e: MarketError| CliError::Validation(format!("{}: {e}", p.display()));
    Ok(MarketData {
        history: load_futures_history(&paths.futures).map_err(|e| ctx(&paths.futures, e))?,
        rates: load_rates(&paths.rates).map_err(|e| ctx(&paths.rates, e))?,
        chains: match &paths.options {
            Some(p) => load_option_chains(p).map_err(|e| ctx(p, e))?,
            None => Vec::new(),
        },
    })
}

fn input_digests(paths: &DataPaths) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for p in [Some(&paths.futures), Some(&paths.rates), paths.options.as_ref()].into_iter().flatten() {
        out.insert(p.display().to_string(), sha256_file(p)?);
    }
    Ok(out)
}

/// Quote counts over the filtered cross-sections. Returns the table and one
/// line per chain that could not be used.
fn moneyness_table(data: &MarketData) -> (MoneynessTable, Vec<String>) {
    let mut table = MoneynessTable::default();
    let mut problems = Vec::new();
    for chain in &data.chains {
        let Some(f) = data.history.settle_on(chain.obs_date) else {
            problems.push(format!("chain {}: no futures settlement on the observation date", chain.obs_date));
            continue;
        };
        match data.rates.rate_on(chain.obs_date).and_then(|r| CrossSection::from_chain(chain, f, r)) {
            Ok((cs, _)) => table.add_cross_section(cs.futures, &cs.quotes),
            Err(e) => problems.push(format!("chain {}: {e}", chain.obs_date)),
        }
    }
    (table, problems)
}

fn cmd_validate_data(a: &DataArgs) -> Result<(), CliError> {
    let paths = data_paths(a.data.as_deref(), a.futures.as_deref(), a.rates.as_deref(), a.options.as_deref())?;
    let data = load_data(&paths)?;
    println!(
        "futures: {} settlements {}..{}",
        data.history.len(),
        data.history.first_date(),
        data.history.last_date()
    );
    println!("rates: {} quotes", data.rates.quotes().len());
    println!("option chains: {}", data.chains.len());
    let (table, problems) = moneyness_table(&data);
    println!("usable cross-sections: {}, quotes: {}", table.calls_per_date.len(), table.total());
    for p in &problems {
        println!("warning: {p}");
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(runtime)?;
        table.write_csv(std::fs::File::create(dir.join("table1.csv")).map_err(runtime)?).map_err(runtime)?;
    }
    let missing: Vec<&String> = problems.iter().filter(|p| p.contains("no futures settlement")).collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!("{} chain(s) observed on dates without a futures settlement", missing.len())));
    }
    Ok(())
}

// ---------------------------------------------------------------- backtest

pub const CONFIG_KEYS: [&str; 20] = [
    "data", "futures", "rates", "options", "out", "roster", "window_short", "window_long", "n_paths", "seed",
    "grid_lo", "grid_hi", "grid_n", "alpha", "split_date", "holidays", "sre_starts", "sre_evals", "sre_refine",
    "sre_polish",
];

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => problems.push(format!("line {}: expected key = value", i + 1)),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Validation(problems.join("; ")))
    }
}

pub struct ResolvedConfig {
    pub backtest: BacktestConfig,
    pub data: Option<PathBuf>,
    pub futures: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub options: Option<PathBuf>,
    pub out: PathBuf,
}

/// Turn the merged key/value map into a configuration, reporting every
/// problem at once.
pub fn resolve_config(kv: &BTreeMap<String, String>) -> Result<ResolvedConfig, CliError> {
    let mut problems = Vec::new();
    for k in kv.keys() {
        if !CONFIG_KEYS.contains(&k.as_str()) {
            problems.push(format!("unknown key {k:?}"));
        }
    }
    let mut cfg = BacktestConfig::default();
    fn num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str, problems: &mut Vec<String>) -> Option<T> {
        let raw = kv.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                problems.push(format!("{key}: cannot parse {raw:?}"));
                None
            }
        }
    }
    if let Some(r) = kv.get("roster") {
        let mut roster = Vec::new();
        for name in r.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name.parse::<ModelId>() {
                Ok(m) => roster.push(m),
                Err(e) => problems.push(e.to_string()),
            }
        }
        cfg.roster = roster;
    }
    if let Some(v) = num(kv, "window_short", &mut problems) {
        cfg.window_days[0] = v;
    }
    if let Some(v) = num(kv, "window_long", &mut problems) {
        cfg.window_days[1] = v;
    }
    if let Some(v) = num(kv, "n_paths", &mut problems) {
        cfg.n_paths = v;
    }
    if let Some(v) = num(kv, "seed", &mut problems) {
        cfg.seed = v;
    }
    if let Some(v) = num(kv, "alpha", &mut problems) {
        cfg.alpha = v;
    }
    let g = cfg.grid;
    let (lo, hi, n) = (
        num(kv, "grid_lo", &mut problems).unwrap_or(g.lo),
        num(kv, "grid_hi", &mut problems).unwrap_or(g.hi),
        num(kv, "grid_n", &mut problems).unwrap_or(g.n),
    );
    if lo < hi && n >= 2 {
        cfg.grid = LogReturnGrid::new(lo, hi, n);
    } else {
        problems.push("grid needs grid_lo < grid_hi and grid_n >= 2".into());
    }
    if let Some(s) = kv.get("split_date") {
        if s.eq_ignore_ascii_case("none") || s.is_empty() {
            cfg.split_date = None;
        } else {
            match s.parse::<NaiveDate>() {
                Ok(d) => cfg.split_date = Some(d),
                Err(_) => problems.push(format!("split_date: cannot parse {s:?}")),
            }
        }
    }
    if let Some(h) = kv.get("holidays") {
        for d in h.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match d.parse::<NaiveDate>() {
                Ok(d) => cfg.holidays.push(d),
                Err(_) => problems.push(format!("holidays: cannot parse {d:?}")),
            }
        }
    }
    if let Some(v) = num(kv, "sre_starts", &mut problems) {
        cfg.sre.starts = v;
    }
    if let Some(v) = num(kv, "sre_evals", &mut problems) {
        cfg.sre.evals_per_start = v;
    }
    if let Some(v) = num(kv, "sre_refine", &mut problems) {
        cfg.sre.refine_evals = v;
    }
    if let Some(v) = num(kv, "sre_polish", &mut problems) {
        cfg.sre.polish_evals = v;
    }
    problems.extend(cfg.problems());
    if !problems.is_empty() {
        return Err(CliError::Validation(format!("invalid configuration:\n  {}", problems.join("\n  "))));
    }
    let path = |k: &str| kv.get(k).map(PathBuf::from);
    Ok(ResolvedConfig {
        backtest: cfg,
        data: path("data"),
        futures: path("futures"),
        rates: path("rates"),
        options: path("options"),
        out: path("out").unwrap_or_else(|| PathBuf::from("report")),
    })
}

fn backtest_kv(a: &BacktestArgs) -> Result<BTreeMap<String, String>, CliError> {
    let mut kv = match &a.config {
        Some(p) => parse_config_text(
            &std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
        )?,
        None => BTreeMap::new(),
    };
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
    set("data", p(&a.data.data));
    set("futures", p(&a.data.futures));
    set("rates", p(&a.data.rates));
    set("options", p(&a.data.options));
    set("out", p(&a.data.out));
    set("roster", a.roster.clone());
    set("window_short", a.window_short.map(|v| v.to_string()));
    set("window_long", a.window_long.map(|v| v.to_string()));
    set("n_paths", a.n_paths.map(|v| v.to_string()));
    set("seed", a.seed.map(|v| v.to_string()));
    set("alpha", a.alpha.map(|v| v.to_string()));
    set("split_date", a.split_date.clone());
    for s in &a.set {
        let (k, v) = split_kv(s)?;
        kv.insert(k, v);
    }
    Ok(kv)
}

fn cmd_backtest(a: &BacktestArgs) -> Result<(), CliError> {
    let kv = backtest_kv(a)?;
    let rc = resolve_config(&kv)?;
    let paths = data_paths(rc.data.as_deref(), rc.futures.as_deref(), rc.rates.as_deref(), rc.options.as_deref())?;
    let data = load_data(&paths)?;
    let cfg = &rc.backtest;
    let mut manifest = RunManifest::new("backtest", cfg.seed, serde_json::to_value(cfg).map_err(runtime)?)?;
    manifest.inputs = input_digests(&paths)?;

    let out = run_backtest(cfg, &data)?;
    let mut files = write_reports(&out, &rc.out)?;
    let (table, _) = moneyness_table(&data);
    table.write_csv(std::fs::File::create(rc.out.join("table1.csv")).map_err(runtime)?).map_err(runtime)?;
    files.push("table1.csv".into());
    manifest.finish(&rc.out, &files)?;

    let board = &out.scoreboard;
    println!("{} cycles, {} models -> {}", board.cycles, board.models.len(), rc.out.display());
    for m in &board.models {
        let ifs = m.ifs.as_ref().map_or("-".to_string(), |r| format!("{:.3} (rank {})", r.ifs, r.ifs_rank));
        println!("  {:<12} evaluated {:>4}  excluded {:>3}  IFS {}", m.model.to_string(), m.evaluated, m.excluded, ifs);
    }
    Ok(())
}

// ---------------------------------------------------------------- score-tables

const MODEL_COLS: [&str; 3] = ["model", "scheme", "name"];
const BERKOWITZ_COLS: [&str; 4] = ["berkowitz", "berkowitz_p", "lr3_p", "p_berkowitz"];
const JB_COLS: [&str; 4] = ["jb", "jb_p", "jarque_bera", "p_jb"];
const KS_COLS: [&str; 3] = ["ks", "ks_p", "p_ks"];
const LOGLIK_COLS: [&str; 4] = ["entire", "loglik", "excess_loglik", "log_likelihood"];
const CRPS_COLS: [&str; 3] = ["entire", "crps", "excess_crps"];

/// Rows of `model -> values` from a CSV, picking each column by the first
/// matching alias (case-insensitive).
fn read_columns(path: &Path, wanted: &[&[&str]]) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let ctx = |e: &dyn std::fmt::Display| CliError::Validation(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| ctx(&e))?;
    let headers: Vec<String> = rdr.headers().map_err(|e| ctx(&e))?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let find = |aliases: &[&str]| aliases.iter().find_map(|a| headers.iter().position(|h| h == a));
    let model_col = find(&MODEL_COLS).ok_or_else(|| ctx(&"no model column"))?;
    let cols: Vec<usize> = wanted
        .iter()
        .map(|aliases| find(aliases).ok_or_else(|| ctx(&format!("no column named any of {aliases:?}"))))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ctx(&e))?;
        let model = rec.get(model_col).unwrap_or("").to_string();
        let mut vals = Vec::new();
        for &c in &cols {
            let raw = rec.get(c).unwrap_or("");
            vals.push(raw.parse::<f64>().map_err(|_| ctx(&format!("row {}: {raw:?} is not a number", i + 2)))?);
        }
        rows.push((model, vals));
    }
    Ok(rows)
}

fn cmd_score_tables(a: &ScoreArgs) -> Result<(), CliError> {
    let p = read_columns(&a.p_values, &[&BERKOWITZ_COLS, &JB_COLS, &KS_COLS])?;
    let ll: BTreeMap<String, f64> = read_columns(&a.loglik, &[&LOGLIK_COLS])?.into_iter().map(|(m, v)| (m, v[0])).collect();
    let cr: BTreeMap<String, f64> = read_columns(&a.crps, &[&CRPS_COLS])?.into_iter().map(|(m, v)| (m, v[0])).collect();
    let names: Vec<&String> = p.iter().map(|(m, _)| m).collect();
    let mut problems = Vec::new();
    for (label, table) in [("log-likelihood", &ll), ("CRPS", &cr)] {
        for m in &names {
            if !table.contains_key(*m) {
                problems.push(format!("{m} missing from the {label} table"));
            }
        }
        for m in table.keys() {
            if !names.contains(&m) {
                problems.push(format!("{m} in the {label} table has no p-values"));
            }
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(format!("model names do not match:\n  {}", problems.join("\n  "))));
    }
    let inputs: Vec<IfsInputs> = p
        .iter()
        .map(|(m, v)| IfsInputs {
            model: m.clone(),
            berkowitz_p: v[0] / 100.0,
            jb_p: v[1] / 100.0,
            ks_p: v[2] / 100.0,
            loglik: ll[m],
            crps: cr[m],
        })
        .collect();
    let rows = score_table(&inputs, a.alpha).map_err(invalid)?;
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(runtime)?;
            crate::backtest::report::write_ifs_csv(&rows, f).map_err(runtime)?;
        }
        None => crate::backtest::report::write_ifs_csv(&rows, std::io::stdout().lock()).map_err(runtime)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_and_overrides() {
        let kv = parse_config_text("# comment\nroster = LN-ATM, HESTON\nn_paths=20000\nsplit_date = none\n").unwrap();
        let rc = resolve_config(&kv).unwrap();
        assert_eq!(rc.backtest.roster, vec![ModelId::LnAtm, ModelId::Heston]);
        assert_eq!(rc.backtest.n_paths, 20000);
        assert_eq!(rc.backtest.split_date, None);
        assert!(parse_config_text("roster LN-ATM").is_err());
    }

    #[test]
    fn all_config_problems_reported_together() {
        let kv = parse_config_text("roster = SABR\nn_paths = ten\nalpha = 3\nbogus = 1\n").unwrap();
        let Err(CliError::Validation(msg)) = resolve_config(&kv) else { panic!() };
        for needle in ["SABR", "n_paths", "alpha", "bogus"] {
            assert!(msg.contains(needle), "{msg}");
        }
    }

    #[test]
    fn world_parameters() {
        assert_eq!(world_from("lognormal", &["sigma=0.3".into()]).unwrap(), World::Lognormal { sigma: 0.3 });
        assert!(world_from("heston", &["sigma=0.3".into()]).is_err());
        assert!(world_from("sabr", &[]).is_err());
    }
}
