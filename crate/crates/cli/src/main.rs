//! `frontier-lab` command-line driver.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use frontier_lab_core::backtest::{
    ledger_csv, run_backtest_window, LedgerPolicy, ShareMode, DEFAULT_CAPITAL,
};
use frontier_lab_core::eigen::{DEFAULT_PORTFOLIO_COUNT, DEFAULT_THRESHOLD};
use frontier_lab_core::frontier::{WeightVector, DEFAULT_RISK_FREE_RATE, DEFAULT_SAMPLE_COUNT};
use frontier_lab_core::ingest::{
    clean_panel, fetch_remote, load_csv, load_csv_range, PricePanel, TickerId, UniverseConfig,
};
use frontier_lab_core::report::{
    build_comparison, build_sector_report, comparison_csv, render_comparison, render_summary,
    write_bundle, BacktestParams, EigenParams, FrontierParams, SectorAnalysis,
};
use frontier_lab_core::stats::TRADING_DAYS;
use frontier_lab_core::Error;

const WEIGHT_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "frontier-lab",
    version,
    about = "Sector portfolio construction and backtesting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a price panel, clean it, and write the cleaned CSV.
    #[command(alias = "ingest")]
    Clean(CleanArgs),
    /// Run the full pipeline for one sector and write its bundle.
    Analyze(AnalyzeArgs),
    /// Analyze several sectors and compare holdout returns.
    Compare(CompareArgs),
    /// Backtest a weight file over a holdout window.
    Backtest(BacktestArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Universe config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Local price CSV.
    #[arg(long, conflicts_with = "url", required_unless_present = "url")]
    data: Option<PathBuf>,
    /// Remote price CSV.
    #[arg(long)]
    url: Option<String>,
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// RNG seed for the frontier sample.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    samples: usize,
    #[arg(long = "risk-free", default_value_t = DEFAULT_RISK_FREE_RATE)]
    risk_free: f64,
    #[arg(long = "pca-threshold", default_value_t = DEFAULT_THRESHOLD)]
    pca_threshold: f64,
    #[arg(long = "pca-count", default_value_t = DEFAULT_PORTFOLIO_COUNT)]
    pca_count: usize,
    #[arg(long, default_value_t = DEFAULT_CAPITAL)]
    capital: f64,
    /// Reject portfolios with short positions at backtest time.
    #[arg(long = "long-only")]
    long_only: bool,
    /// Buy whole shares only; the remainder is held as cash.
    #[arg(long = "whole-shares")]
    whole_shares: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory for the bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Universe configs, paired in order with `--data`.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Price CSV paths or http(s) URLs, paired in order with `--config`.
    #[arg(long, required = true)]
    data: Vec<String>,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory; each sector gets a subdirectory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// CSV with header `ticker,weight`.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Take the window from a universe config's test dates.
    #[arg(long, conflicts_with_all = ["from", "to"], required_unless_present_all = ["from", "to"])]
    config: Option<PathBuf>,
    #[arg(long, requires = "to")]
    from: Option<NaiveDate>,
    #[arg(long, requires = "from")]
    to: Option<NaiveDate>,
    #[arg(long, default_value_t = DEFAULT_CAPITAL)]
    capital: f64,
    #[arg(long = "long-only")]
    long_only: bool,
    #[arg(long = "whole-shares")]
    whole_shares: bool,
    /// Ledger CSV path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum Failure {
    /// Bad arguments or inputs that fail validation.
    Usage(String),
    /// Data or pipeline failure.
    Pipeline(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Pipeline(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Pipeline(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn pipeline(msg: impl Into<String>) -> Failure {
    Failure::Pipeline(msg.into())
}

fn stage(name: &str, what: &dyn std::fmt::Display, err: Error) -> Failure {
    pipeline(format!("[{name}] {what}: {err}"))
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Clean(a) => cmd_clean(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Backtest(a) => cmd_backtest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: &Path) -> Result<UniverseConfig, Failure> {
    UniverseConfig::load(path).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn load_source(
    config: &UniverseConfig,
    data: Option<&Path>,
    url: Option<&str>,
) -> Result<PricePanel, Failure> {
    match (data, url) {
        (Some(path), _) => load_csv(path, config).map_err(|e| stage("ingest", &path.display(), e)),
        (None, Some(url)) => {
            let outcome = fetch_remote(url, config).map_err(|e| stage("ingest", &url, e))?;
            log::info!("fetched {url} into {}", outcome.cache_path.display());
            Ok(outcome.panel)
        }
        (None, None) => Err(usage("one of --data or --url is required")),
    }
}

fn load_data_arg(config: &UniverseConfig, data: &str) -> Result<PricePanel, Failure> {
    if data.starts_with("http://") || data.starts_with("https://") {
        load_source(config, None, Some(data))
    } else {
        load_source(config, Some(Path::new(data)), None)
    }
}

fn policy(long_only: bool, whole_shares: bool) -> LedgerPolicy {
    LedgerPolicy {
        long_only,
        share_mode: if whole_shares {
            ShareMode::Whole
        } else {
            ShareMode::Fractional
        },
    }
}

fn params(m: &ModelArgs) -> Result<(FrontierParams, EigenParams, BacktestParams), Failure> {
    if m.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    if !m.risk_free.is_finite() {
        return Err(usage("--risk-free must be finite"));
    }
    if !(m.pca_threshold > 0.0 && m.pca_threshold <= 1.0) {
        return Err(usage("--pca-threshold must lie in (0, 1]"));
    }
    if m.pca_count == 0 {
        return Err(usage("--pca-count must be positive"));
    }
    check_capital(m.capital)?;
    Ok((
        FrontierParams {
            sample_count: m.samples,
            seed: m.seed,
            risk_free_rate: m.risk_free,
            trading_days: TRADING_DAYS,
        },
        EigenParams {
            threshold: m.pca_threshold,
            portfolio_count: m.pca_count,
        },
        BacktestParams {
            capital: m.capital,
            policy: policy(m.long_only, m.whole_shares),
        },
    ))
}

fn check_capital(capital: f64) -> Result<(), Failure> {
    if capital.is_finite() && capital > 0.0 {
        Ok(())
    } else {
        Err(usage("--capital must be positive"))
    }
}

fn analyze(
    config: &UniverseConfig,
    panel: &PricePanel,
    model: &ModelArgs,
) -> Result<SectorAnalysis, Failure> {
    let (fp, ep, bp) = params(model)?;
    build_sector_report(config, panel, &fp, &ep, &bp)
        .map_err(|e| pipeline(format!("sector {}: {e}", config.sector_name)))
}

fn write_out(dir: &Path, analysis: &SectorAnalysis) -> Result<(), Failure> {
    write_bundle(dir, analysis).map_err(|e| stage("write", &dir.display(), e))
}

fn cmd_clean(a: CleanArgs) -> Result<(), Failure> {
    let config = load_config(&a.source.config)?;
    let raw = load_source(&config, a.source.data.as_deref(), a.source.url.as_deref())?;
    let cleaned = clean_panel(&raw).map_err(|e| stage("clean", &config.sector_name, e))?;
    for d in &cleaned.dropped {
        println!(
            "dropped {} ({} of {} cells missing)",
            d.ticker, d.missing, d.rows
        );
    }
    for (t, n) in &cleaned.imputed {
        println!("imputed {n} cells of {t}");
    }
    cleaned
        .panel
        .write_csv(&a.out)
        .map_err(|e| stage("write", &a.out.display(), e))?;
    println!(
        "{} rows x {} tickers -> {}",
        cleaned.panel.n_dates(),
        cleaned.panel.n_tickers(),
        a.out.display()
    );
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    params(&a.model)?;
    let config = load_config(&a.source.config)?;
    let raw = load_source(&config, a.source.data.as_deref(), a.source.url.as_deref())?;
    let analysis = analyze(&config, &raw, &a.model)?;
    write_out(&a.out, &analysis)?;
    print!("{}", render_summary(&analysis.report));
    println!("bundle written to {}", a.out.display());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    params(&a.model)?;
    if a.config.len() != a.data.len() {
        return Err(usage(format!(
            "{} --config values but {} --data values",
            a.config.len(),
            a.data.len()
        )));
    }
    let configs = a
        .config
        .iter()
        .map(|p| load_config(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for c in &configs {
        if !seen.insert(c.sector_name.as_str()) {
            return Err(usage(format!("duplicate sector name {}", c.sector_name)));
        }
    }

    let analyses = configs
        .par_iter()
        .zip(a.data.par_iter())
        .map(|(config, data)| {
            let panel = load_data_arg(config, data)
                .map_err(|f| pipeline(format!("sector {}: {}", config.sector_name, f.message())))?;
            analyze(config, &panel, &a.model)
        })
        .collect::<Result<Vec<_>, _>>()?;

    for analysis in &analyses {
        write_out(&a.out.join(&analysis.report.sector_name), analysis)?;
    }
    let reports: Vec<_> = analyses.into_iter().map(|x| x.report).collect();
    let summary = build_comparison(&reports);
    let path = a.out.join("comparison.csv");
    fs::write(&path, comparison_csv(&summary))
        .map_err(|e| stage("write", &path.display(), Error::io(&path, e)))?;
    print!("{}", render_comparison(&summary));
    Ok(())
}

fn read_weights(path: &Path) -> Result<WeightVector, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("weights {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| usage(format!("weights {}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || &headers[0] != "ticker" || &headers[1] != "weight" {
        return Err(usage(format!(
            "weights {}: header must be `ticker,weight`",
            path.display()
        )));
    }
    let mut tickers = Vec::new();
    let mut weights = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| usage(format!("weights {}: {e}", path.display())))?;
        let ticker = TickerId::new(&rec[0]).map_err(|e| usage(e.to_string()))?;
        let weight: f64 = rec[1].parse().map_err(|_| {
            usage(format!(
                "weights {}: bad weight {:?}",
                path.display(),
                &rec[1]
            ))
        })?;
        tickers.push(ticker);
        weights.push(weight);
    }
    let sum: f64 = weights.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(usage(Error::WeightsNotNormalized(sum).to_string()));
    }
    WeightVector::normalized(tickers, &weights).map_err(|e| usage(e.to_string()))
}

fn cmd_backtest(a: BacktestArgs) -> Result<(), Failure> {
    check_capital(a.capital)?;
    let weights = read_weights(&a.weights)?;
    let (start, end) = match (&a.config, a.from, a.to) {
        (Some(path), _, _) => {
            let c = load_config(path)?;
            (c.test_start, c.test_end)
        }
        (None, Some(from), Some(to)) => (from, to),
        _ => {
            return Err(usage(
                "either --config or both --from and --to are required",
            ))
        }
    };
    if end < start {
        return Err(usage(format!("--to {end} precedes --from {start}")));
    }
    let panel = load_csv_range(&a.data, weights.tickers(), start, end)
        .map_err(|e| stage("ingest", &a.data.display(), e))?;
    let ledger = run_backtest_window(
        &panel,
        &weights,
        a.capital,
        start,
        end,
        policy(a.long_only, a.whole_shares),
    )
    .map_err(|e| match e {
        Error::NegativeWeightNotAllowed { .. } => usage(e.to_string()),
        e => stage("backtest", &a.data.display(), e),
    })?;

    let csv = ledger_csv(&ledger);
    match &a.out {
        Some(path) => fs::write(path, &csv)
            .map_err(|e| stage("write", &path.display(), Error::io(path, e)))?,
        None => print!("{csv}"),
    }
    println!(
        "total return {:.2}% ({} -> {})",
        ledger.total_return * 100.0,
        ledger.entry_date.map(|d| d.to_string()).unwrap_or_default(),
        ledger.exit_date.map(|d| d.to_string()).unwrap_or_default()
    );
    Ok(())
}
