//! Daily returns, annualized return/volatility, and covariance/correlation.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PricePanel, TickerId};

/// Default annualization constant (trading days per year).
pub const TRADING_DAYS: u32 = 250;

/// Daily simple and log returns, one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Date of the close that ends each return interval.
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<TickerId>,
    /// `closes[t+1] / closes[t] - 1`, shape `T x n`.
    pub simple: DMatrix<f64>,
    /// `ln(1 + simple)`, shape `T x n`.
    pub log: DMatrix<f64>,
}

impl ReturnPanel {
    /// Builds a return panel directly from simple returns (log returns derived).
    pub fn from_simple(
        dates: Vec<NaiveDate>,
        tickers: Vec<TickerId>,
        simple: DMatrix<f64>,
    ) -> Result<Self> {
        if simple.nrows() != dates.len() || simple.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch(format!(
                "returns are {}x{} for {} dates and {} tickers",
                simple.nrows(),
                simple.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        let log = simple.map(f64::ln_1p);
        Ok(ReturnPanel {
            dates,
            tickers,
            simple,
            log,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.simple.nrows()
    }

    pub fn n_tickers(&self) -> usize {
        self.simple.ncols()
    }
}

/// Annualized per-ticker statistics of daily simple returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualStats {
    pub tickers: Vec<TickerId>,
    /// Mean daily return times `trading_days`.
    pub annual_return: Vec<f64>,
    /// Sample daily stdev times `sqrt(trading_days)`.
    pub annual_volatility: Vec<f64>,
    pub daily_mean: Vec<f64>,
    pub daily_stdev: Vec<f64>,
    pub trading_days: u32,
}

impl AnnualStats {
    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }
}

/// Sample covariance and correlation of daily simple returns.
#[derive(Debug, Clone, PartialEq)]
pub struct CovCorr {
    pub tickers: Vec<TickerId>,
    pub covariance: DMatrix<f64>,
    pub correlation: DMatrix<f64>,
}

impl CovCorr {
    /// Builds from a covariance matrix, deriving the correlation.
    pub fn from_covariance(tickers: Vec<TickerId>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = tickers.len();
        if covariance.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {:?} for {n} tickers",
                covariance.shape()
            )));
        }
        let sd: Vec<f64> = (0..n).map(|i| covariance[(i, i)].sqrt()).collect();
        if let Some(i) = sd.iter().position(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::DegenerateColumn(tickers[i].to_string()));
        }
        let correlation = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                covariance[(i, j)] / (sd[i] * sd[j])
            }
        });
        Ok(CovCorr {
            tickers,
            covariance,
            correlation,
        })
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }
}

/// Simple and log daily returns from a complete (cleaned) price panel.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.n_dates() < 2 {
        return Err(Error::InsufficientData(format!(
            "returns need at least 2 price rows, got {}",
            panel.n_dates()
        )));
    }
    let closes = panel.to_dense()?;
    let t = closes.nrows() - 1;
    let simple = DMatrix::from_fn(t, closes.ncols(), |r, c| {
        closes[(r + 1, c)] / closes[(r, c)] - 1.0
    });
    ReturnPanel::from_simple(
        panel.dates()[1..].to_vec(),
        panel.tickers().to_vec(),
        simple,
    )
}

fn column_mean_stdev(col: impl Iterator<Item = f64> + Clone, len: usize) -> (f64, f64) {
    let mean = col.clone().sum::<f64>() / len as f64;
    let ss: f64 = col.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (len - 1) as f64).sqrt())
}

/// Arithmetic annualization: `mean * days` and `stdev * sqrt(days)`.
pub fn annualize(returns: &ReturnPanel, trading_days: u32) -> Result<AnnualStats> {
    let t = returns.n_periods();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "annualizing needs at least 2 return periods, got {t}"
        )));
    }
    if trading_days == 0 {
        return Err(Error::InvalidParameter(
            "trading_days must be positive".into(),
        ));
    }
    let days = f64::from(trading_days);
    let (daily_mean, daily_stdev): (Vec<f64>, Vec<f64>) = returns
        .simple
        .column_iter()
        .map(|c| column_mean_stdev(c.iter().copied(), t))
        .unzip();
    Ok(AnnualStats {
        tickers: returns.tickers.clone(),
        annual_return: daily_mean.iter().map(|m| m * days).collect(),
        annual_volatility: daily_stdev.iter().map(|s| s * days.sqrt()).collect(),
        daily_mean,
        daily_stdev,
        trading_days,
    })
}

/// Sample covariance (denominator `T-1`) of the columns of `data`.
pub(crate) fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let t = data.nrows();
    let means = DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.mean()));
    let mut centered = data.clone();
    for (mut col, m) in centered.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-m);
    }
    let mut cov = centered.tr_mul(&centered) / (t - 1) as f64;
    // exact symmetry
    for i in 0..cov.nrows() {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Sample covariance and correlation of daily simple returns.
pub fn cov_corr(returns: &ReturnPanel) -> Result<CovCorr> {
    let t = returns.n_periods();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 return periods, got {t}"
        )));
    }
    let covariance = sample_covariance(&returns.simple);
    CovCorr::from_covariance(returns.tickers.clone(), covariance)
}

/// Correlation of the raw close-price levels (labelled separately from the
/// return correlation in reports).
pub fn price_correlation(panel: &PricePanel) -> Result<DMatrix<f64>> {
    if panel.n_dates() < 2 {
        return Err(Error::InsufficientData(
            "price correlation needs 2 rows".into(),
        ));
    }
    let closes = panel.to_dense()?;
    Ok(CovCorr::from_covariance(panel.tickers().to_vec(), sample_covariance(&closes))?.correlation)
}

/// Renders a labelled square matrix as CSV (`ticker` corner cell).
pub fn matrix_to_csv(tickers: &[TickerId], m: &DMatrix<f64>) -> String {
    let mut out = String::from("ticker");
    for t in tickers {
        out.push(',');
        out.push_str(t.as_str());
    }
    out.push('\n');
    for (i, t) in tickers.iter().enumerate() {
        out.push_str(t.as_str());
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&m[(i, j)].to_string());
        }
        out.push('\n');
    }
    out
}

/// JSON-friendly labelled matrix block for heatmap tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledMatrix {
    pub label: String,
    pub tickers: Vec<TickerId>,
    pub rows: Vec<Vec<f64>>,
}

impl LabelledMatrix {
    pub fn new(label: impl Into<String>, tickers: &[TickerId], m: &DMatrix<f64>) -> Self {
        LabelledMatrix {
            label: label.into(),
            tickers: tickers.to_vec(),
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let m = self.rows.first().map_or(0, Vec::len);
        DMatrix::from_fn(n, m, |i, j| self.rows[i][j])
    }
}
