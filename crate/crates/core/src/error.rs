use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the portfolio pipeline.
#[derive(Debug, Error)]
pub enum Error {
    // --- ingest ---
    #[error("invalid ticker symbol {0:?}")]
    InvalidTicker(String),
    #[error("invalid universe config: {0}")]
    InvalidConfig(String),
    #[error("configured ticker {0} has no column in the price data")]
    MissingColumn(String),
    #[error("no rows fall inside the configured date window")]
    EmptyWindow,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("network unavailable: {0}")]
    NetworkUnavailable(String),
    #[error("remote endpoint returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("fewer than two tickers survive cleaning ({survivors} left)")]
    UniverseTooSmall { survivors: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // --- stats ---
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("price panel still has {0} missing cells; clean it first")]
    MissingValues(usize),
    #[error("column {0} has zero variance")]
    DegenerateColumn(String),

    // --- frontier ---
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("portfolio volatility is zero")]
    ZeroVolatility,
    #[error("frontier sample is empty")]
    EmptySample,
    #[error("weights must sum to 1 (got {0})")]
    WeightsNotNormalized(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // --- eigen ---
    #[error("eigen solver failed to converge: {0}")]
    NumericalFailure(String),
    #[error("principal component {0} has an entry sum too close to zero to normalize")]
    DegenerateComponent(usize),
    #[error("eigen portfolio list is empty")]
    EmptyList,

    // --- backtest ---
    #[error("negative weight {weight} on {ticker} in a long-only ledger")]
    NegativeWeightNotAllowed { ticker: String, weight: f64 },
    #[error("no entry price for {0}")]
    MissingEntryPrice(String),
    #[error("no exit price for {0}")]
    MissingExitPrice(String),
    #[error("invalid price {price} for {ticker}")]
    InvalidPrice { ticker: String, price: f64 },
    #[error("price panel does not cover the test window: {0}")]
    WindowNotCovered(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
