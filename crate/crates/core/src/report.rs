//! Per-sector analysis bundles and the cross-sector comparison.

use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{ledger_csv, run_backtest, BacktestLedger, LedgerPolicy, DEFAULT_CAPITAL};
use crate::eigen::{
    best_eigen_portfolio, eigen_decompose, eigen_portfolio, scree_csv, select_components,
    standardize, EigenModel, EigenPortfolio, DEFAULT_PORTFOLIO_COUNT, DEFAULT_THRESHOLD,
};
use crate::error::Error;
use crate::frontier::{
    equal_weight_portfolio, frontier_csv, min_risk_portfolio, opt_risk_portfolio, sample_frontier,
    FrontierPoint, FrontierSample, FrontierSidecar, Selection, DEFAULT_RISK_FREE_RATE,
    DEFAULT_SAMPLE_COUNT,
};
use crate::ingest::{clean_panel, DroppedColumn, PricePanel, TickerId, UniverseConfig};
use crate::stats::{
    annualize, compute_returns, cov_corr, matrix_to_csv, price_correlation, LabelledMatrix,
    TRADING_DAYS,
};

/// Tolerance for calling a comparison a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

const ANNUALIZATION_NOTE: &str =
    "annual return = mean daily simple return x trading_days; annual volatility = sample daily stdev x sqrt(trading_days)";

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierParams {
    pub sample_count: usize,
    pub seed: u64,
    pub risk_free_rate: f64,
    pub trading_days: u32,
}

impl FrontierParams {
    pub fn with_seed(seed: u64) -> Self {
        FrontierParams {
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed,
            risk_free_rate: DEFAULT_RISK_FREE_RATE,
            trading_days: TRADING_DAYS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenParams {
    /// Cumulative explained-variance threshold.
    pub threshold: f64,
    /// Number of leading components turned into portfolios.
    pub portfolio_count: usize,
}

impl Default for EigenParams {
    fn default() -> Self {
        EigenParams {
            threshold: DEFAULT_THRESHOLD,
            portfolio_count: DEFAULT_PORTFOLIO_COUNT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestParams {
    pub capital: f64,
    pub policy: LedgerPolicy,
}

impl Default for BacktestParams {
    fn default() -> Self {
        BacktestParams {
            capital: DEFAULT_CAPITAL,
            policy: LedgerPolicy::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Clean,
    Window,
    Returns,
    Statistics,
    Covariance,
    Frontier,
    Selection,
    Pca,
    EigenPortfolios,
    Backtest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Clean => "clean",
            Stage::Window => "window",
            Stage::Returns => "returns",
            Stage::Statistics => "statistics",
            Stage::Covariance => "covariance",
            Stage::Frontier => "frontier",
            Stage::Selection => "selection",
            Stage::Pca => "pca",
            Stage::EigenPortfolios => "eigen-portfolios",
            Stage::Backtest => "backtest",
        };
        f.write_str(s)
    }
}

/// A pipeline error tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("[{stage}] {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::error::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// One row of the per-ticker return/risk table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickerStats {
    pub ticker: TickerId,
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub daily_mean: f64,
    pub daily_stdev: f64,
}

/// One row of the three-way weight table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub ticker: TickerId,
    pub min_risk: f64,
    pub opt_risk: f64,
    pub eigen: f64,
}

/// In-sample return and risk of one constructed portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSummary {
    pub name: String,
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub sharpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRef {
    pub seed: u64,
    pub sample_count: usize,
    pub risk_free_rate: f64,
    pub scatter_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub cumulative_explained: Vec<f64>,
    /// Row `i` holds ticker `i`'s loading on every component.
    pub eigenvectors: Vec<Vec<f64>>,
    pub threshold: f64,
    pub selected_components: usize,
    pub selected_cumulative: f64,
    pub portfolios: Vec<EigenPortfolio>,
    /// Component index of the portfolio with the best return/volatility.
    pub best_component_index: usize,
    pub jacobi_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector_name: String,
    pub tickers: Vec<TickerId>,
    pub dropped: Vec<DroppedColumn>,
    pub imputed: Vec<(TickerId, usize)>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub training_rows: usize,
    pub trading_days: u32,
    pub annualization: String,
    pub risk_free_rate: f64,
    pub stats: Vec<TickerStats>,
    pub equal_weight: FrontierPoint,
    pub min_risk: Selection,
    pub opt_risk: Selection,
    pub best_eigen: EigenPortfolio,
    pub weights: Vec<WeightRow>,
    pub summary: Vec<PortfolioSummary>,
    pub frontier: FrontierRef,
    pub eigen: EigenDiagnostics,
    pub return_correlation: LabelledMatrix,
    pub price_correlation: LabelledMatrix,
    pub backtest_opt: BacktestLedger,
    pub backtest_eigen: BacktestLedger,
    pub notes: Vec<String>,
}

impl SectorReport {
    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, Error> {
        Ok(serde_json::from_str(json)?)
    }
}

/// A report plus the artifacts too large to embed in it.
#[derive(Debug, Clone)]
pub struct SectorAnalysis {
    pub report: SectorReport,
    pub frontier: FrontierSample,
    pub eigen_model: EigenModel,
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Runs the full sector pipeline on a raw (uncleaned) price panel covering
/// both windows.
pub fn build_sector_report(
    config: &UniverseConfig,
    panel: &PricePanel,
    frontier: &FrontierParams,
    eigen: &EigenParams,
    backtest: &BacktestParams,
) -> Result<SectorAnalysis, PipelineError> {
    let mut notes = vec![format!("annualization: {ANNUALIZATION_NOTE}")];

    let cleaned = clean_panel(panel).at(Stage::Clean)?;
    for d in &cleaned.dropped {
        notes.push(format!(
            "dropped {}: {} of {} cells missing",
            d.ticker, d.missing, d.rows
        ));
    }
    let full = &cleaned.panel;
    let tickers = full.tickers().to_vec();

    let train = full.window(config.train_start, config.train_end);
    if train.n_dates() < 3 {
        return Err(PipelineError {
            stage: Stage::Window,
            source: Error::InsufficientData(format!(
                "{} price rows in the training window",
                train.n_dates()
            )),
        });
    }
    let returns = compute_returns(&train).at(Stage::Returns)?;
    let stats = annualize(&returns, frontier.trading_days).at(Stage::Statistics)?;
    let cov = cov_corr(&returns).at(Stage::Covariance)?;
    let price_corr = price_correlation(&train).at(Stage::Covariance)?;

    let rf = frontier.risk_free_rate;
    let equal_weight = equal_weight_portfolio(&stats, &cov, rf).at(Stage::Frontier)?;
    let sample = sample_frontier(&stats, &cov, frontier.sample_count, frontier.seed, rf)
        .at(Stage::Frontier)?;
    let min_risk = min_risk_portfolio(&sample).at(Stage::Selection)?;
    let opt_risk = opt_risk_portfolio(&sample).at(Stage::Selection)?;

    let standardized = standardize(&returns).at(Stage::Pca)?;
    let model = eigen_decompose(&standardized).at(Stage::Pca)?;
    let selected = select_components(&model, eigen.threshold).at(Stage::Pca)?;

    let n = tickers.len();
    let count = eigen.portfolio_count.min(n);
    if count == 0 {
        return Err(PipelineError {
            stage: Stage::EigenPortfolios,
            source: Error::InvalidParameter("portfolio count must be positive".into()),
        });
    }
    if count < eigen.portfolio_count {
        notes.push(format!(
            "only {n} tickers; building {count} eigen portfolios instead of {}",
            eigen.portfolio_count
        ));
    }
    let mut portfolios = Vec::with_capacity(count);
    for k in 0..count {
        match eigen_portfolio(&model, k, &stats, &cov, rf) {
            Ok(p) => portfolios.push(p),
            Err(Error::DegenerateComponent(k)) => {
                notes.push(format!("component {k} skipped: loadings sum to zero"));
            }
            Err(e) => return Err(e).at(Stage::EigenPortfolios),
        }
    }
    let best_eigen = best_eigen_portfolio(&portfolios).at(Stage::EigenPortfolios)?;
    if !best_eigen.weights.is_long_only() {
        notes.push(format!(
            "best eigen portfolio (component {}) holds short positions",
            best_eigen.component_index
        ));
    }

    let backtest_opt = run_backtest(
        full,
        &opt_risk.point.weights,
        backtest.capital,
        config,
        backtest.policy,
    )
    .at(Stage::Backtest)?;
    let backtest_eigen = run_backtest(
        full,
        &best_eigen.weights,
        backtest.capital,
        config,
        backtest.policy,
    )
    .at(Stage::Backtest)?;

    let stats_rows = tickers
        .iter()
        .enumerate()
        .map(|(i, t)| TickerStats {
            ticker: t.clone(),
            annual_return: stats.annual_return[i],
            annual_volatility: stats.annual_volatility[i],
            daily_mean: stats.daily_mean[i],
            daily_stdev: stats.daily_stdev[i],
        })
        .collect();
    let weights = tickers
        .iter()
        .enumerate()
        .map(|(i, t)| WeightRow {
            ticker: t.clone(),
            min_risk: min_risk.point.weights.weights()[i],
            opt_risk: opt_risk.point.weights.weights()[i],
            eigen: best_eigen.weights.weights()[i],
        })
        .collect();
    let summary = vec![
        summarize("equal_weight", &equal_weight),
        summarize("min_risk", &min_risk.point),
        summarize("opt_risk", &opt_risk.point),
        PortfolioSummary {
            name: "eigen".into(),
            annual_return: best_eigen.in_sample_return,
            annual_volatility: best_eigen.in_sample_volatility,
            sharpe: best_eigen.sharpe,
        },
    ];

    let diagnostics = EigenDiagnostics {
        eigenvalues: model.eigenvalues.clone(),
        explained_variance_ratio: model.explained_variance_ratio.clone(),
        cumulative_explained: model.cumulative_explained.clone(),
        eigenvectors: model
            .eigenvectors
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        threshold: eigen.threshold,
        selected_components: selected,
        selected_cumulative: model.cumulative_explained[selected - 1],
        best_component_index: best_eigen.component_index,
        portfolios,
        jacobi_sweeps: model.sweeps,
    };

    let report = SectorReport {
        sector_name: config.sector_name.clone(),
        tickers: tickers.clone(),
        dropped: cleaned.dropped.clone(),
        imputed: cleaned.imputed.clone(),
        train_start: config.train_start,
        train_end: config.train_end,
        test_start: config.test_start,
        test_end: config.test_end,
        training_rows: train.n_dates(),
        trading_days: frontier.trading_days,
        annualization: ANNUALIZATION_NOTE.to_string(),
        risk_free_rate: rf,
        stats: stats_rows,
        equal_weight,
        min_risk,
        opt_risk,
        best_eigen,
        weights,
        summary,
        frontier: FrontierRef {
            seed: sample.seed,
            sample_count: sample.points.len(),
            risk_free_rate: sample.risk_free_rate,
            scatter_file: "frontier.csv".into(),
        },
        eigen: diagnostics,
        return_correlation: LabelledMatrix::new(
            "daily simple return correlation",
            &tickers,
            &cov.correlation,
        ),
        price_correlation: LabelledMatrix::new("close price correlation", &tickers, &price_corr),
        backtest_opt,
        backtest_eigen,
        notes,
    };

    Ok(SectorAnalysis {
        report,
        frontier: sample,
        eigen_model: model,
    })
}

fn summarize(name: &str, p: &FrontierPoint) -> PortfolioSummary {
    PortfolioSummary {
        name: name.into(),
        annual_return: p.annual_return,
        annual_volatility: p.annual_volatility,
        sharpe: p.sharpe,
    }
}

// ---------------------------------------------------------------------------
// Bundle output
// ---------------------------------------------------------------------------

pub fn stats_csv(report: &SectorReport) -> String {
    let mut out = String::from("ticker,annual_return,annual_volatility,daily_mean,daily_stdev\n");
    for s in &report.stats {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.ticker, s.annual_return, s.annual_volatility, s.daily_mean, s.daily_stdev
        ));
    }
    out
}

pub fn weights_csv(report: &SectorReport) -> String {
    let mut out = String::from("ticker,min_risk,opt_risk,eigen\n");
    for w in &report.weights {
        out.push_str(&format!(
            "{},{},{},{}\n",
            w.ticker, w.min_risk, w.opt_risk, w.eigen
        ));
    }
    out
}

/// Writes the sector bundle into `dir` (created if needed).
pub fn write_bundle(dir: &Path, analysis: &SectorAnalysis) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = &analysis.report;
    let sidecar = FrontierSidecar::from_sample(&analysis.frontier)?;
    let files: [(&str, String); 10] = [
        ("stats.csv", stats_csv(report)),
        ("weights.csv", weights_csv(report)),
        ("frontier.csv", frontier_csv(&analysis.frontier)),
        ("frontier.json", serde_json::to_string_pretty(&sidecar)?),
        ("scree.csv", scree_csv(&analysis.eigen_model)),
        (
            "eigen_weights.csv",
            crate::eigen::eigen_weights_csv(&report.eigen.portfolios),
        ),
        (
            "corr.csv",
            matrix_to_csv(&report.tickers, &report.return_correlation.to_matrix()),
        ),
        ("backtest_opt.csv", ledger_csv(&report.backtest_opt)),
        ("backtest_eigen.csv", ledger_csv(&report.backtest_eigen)),
        ("report.json", report.to_json()?),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Fixed-width text summary, percentages rounded to two decimals.
pub fn render_summary(report: &SectorReport) -> String {
    let pct = |x: f64| format!("{:.2}", x * 100.0);
    let mut out = format!("== {} ==\n", report.sector_name);
    for d in &report.dropped {
        out.push_str(&format!(
            "dropped {} ({} of {} missing)\n",
            d.ticker, d.missing, d.rows
        ));
    }
    out.push_str(&format!(
        "{:<16} {:>10} {:>10} {:>9} {:>9} {:>9}\n",
        "ticker", "return %", "risk %", "min-risk", "opt-risk", "eigen"
    ));
    for (s, w) in report.stats.iter().zip(&report.weights) {
        out.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>9.4} {:>9.4} {:>9.4}\n",
            s.ticker.as_str(),
            pct(s.annual_return),
            pct(s.annual_volatility),
            w.min_risk,
            w.opt_risk,
            w.eigen
        ));
    }
    out.push_str(&format!(
        "\n{:<16} {:>10} {:>10} {:>8}\n",
        "portfolio", "return %", "risk %", "sharpe"
    ));
    for p in &report.summary {
        out.push_str(&format!(
            "{:<16} {:>10} {:>10} {:>8.2}\n",
            p.name,
            pct(p.annual_return),
            pct(p.annual_volatility),
            p.sharpe
        ));
    }
    out.push_str(&format!(
        "\nPCA: {} components explain {}% (threshold {}%); best eigen portfolio = component {}\n",
        report.eigen.selected_components,
        pct(report.eigen.selected_cumulative),
        pct(report.eigen.threshold),
        report.eigen.best_component_index
    ));
    out.push_str(&format!(
        "holdout {} -> {}: opt-risk {}%, eigen {}%\n",
        report
            .backtest_opt
            .entry_date
            .map(|d| d.to_string())
            .unwrap_or_default(),
        report
            .backtest_opt
            .exit_date
            .map(|d| d.to_string())
            .unwrap_or_default(),
        pct(report.backtest_opt.total_return),
        pct(report.backtest_eigen.total_return)
    ));
    out
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Opt,
    Eigen,
    Tie,
}

impl Winner {
    pub fn decide(opt_return: f64, eigen_return: f64) -> Winner {
        if (opt_return - eigen_return).abs() <= TIE_TOLERANCE {
            Winner::Tie
        } else if opt_return > eigen_return {
            Winner::Opt
        } else {
            Winner::Eigen
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Opt => "opt",
            Winner::Eigen => "eigen",
            Winner::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sector: String,
    pub opt_return: f64,
    pub eigen_return: f64,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub rows: Vec<ComparisonRow>,
    pub opt_wins: usize,
    pub eigen_wins: usize,
    pub ties: usize,
}

/// Compares holdout returns of the opt-risk and eigen ledgers per sector.
pub fn build_comparison(reports: &[SectorReport]) -> ComparisonSummary {
    compare_returns(reports.iter().map(|r| {
        (
            r.sector_name.clone(),
            r.backtest_opt.total_return,
            r.backtest_eigen.total_return,
        )
    }))
}

/// Comparison from `(sector, opt_return, eigen_return)` triples.
pub fn compare_returns(rows: impl IntoIterator<Item = (String, f64, f64)>) -> ComparisonSummary {
    let rows: Vec<ComparisonRow> = rows
        .into_iter()
        .map(|(sector, opt_return, eigen_return)| ComparisonRow {
            sector,
            opt_return,
            eigen_return,
            winner: Winner::decide(opt_return, eigen_return),
        })
        .collect();
    let count = |w: Winner| rows.iter().filter(|r| r.winner == w).count();
    ComparisonSummary {
        opt_wins: count(Winner::Opt),
        eigen_wins: count(Winner::Eigen),
        ties: count(Winner::Tie),
        rows,
    }
}

/// `sector,opt_return,eigen_return,winner`.
pub fn comparison_csv(summary: &ComparisonSummary) -> String {
    let mut out = String::from("sector,opt_return,eigen_return,winner\n");
    for r in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sector,
            r.opt_return,
            r.eigen_return,
            r.winner.as_str()
        ));
    }
    out
}

pub fn render_comparison(summary: &ComparisonSummary) -> String {
    let mut out = format!(
        "{:<20} {:>10} {:>10} {:>7}\n",
        "sector", "opt %", "eigen %", "winner"
    );
    for r in &summary.rows {
        out.push_str(&format!(
            "{:<20} {:>10.2} {:>10.2} {:>7}\n",
            r.sector,
            r.opt_return * 100.0,
            r.eigen_return * 100.0,
            r.winner.as_str()
        ));
    }
    out.push_str(&format!(
        "opt wins {}, eigen wins {}, ties {}\n",
        summary.opt_wins, summary.eigen_wins, summary.ties
    ));
    out
}
