//! Sector portfolio construction: price ingest, return statistics,
//! Monte Carlo efficient frontiers, PCA eigen portfolios and holdout backtests.

pub mod backtest;
pub mod eigen;
pub mod error;
pub mod frontier;
pub mod ingest;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
