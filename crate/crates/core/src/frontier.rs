//! Monte Carlo efficient frontier: random simplex portfolios, the equal-weight
//! baseline, and the minimum-risk / maximum-Sharpe selections.
//!
//! Sample `k` draws its weights from a ChaCha8 stream keyed by `(seed, k)`,
//! so results do not depend on evaluation order or thread count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TickerId;
use crate::stats::{AnnualStats, CovCorr};

/// Default number of sampled portfolios.
pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;
/// Default annual risk-free rate.
pub const DEFAULT_RISK_FREE_RATE: f64 = 0.01;
/// Tolerance on `sum(weights) == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Allocation across a ticker list. Weights sum to one; entries may be negative
/// only for eigen portfolios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    tickers: Vec<TickerId>,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(tickers: Vec<TickerId>, weights: Vec<f64>) -> Result<Self> {
        if tickers.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tickers but {} weights",
                tickers.len(),
                weights.len()
            )));
        }
        if tickers.is_empty() {
            return Err(Error::DimensionMismatch("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::WeightsNotNormalized(sum));
        }
        Ok(WeightVector { tickers, weights })
    }

    /// Divides `raw` by its sum.
    pub fn normalized(tickers: Vec<TickerId>, raw: &[f64]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || sum.abs() <= f64::EPSILON {
            return Err(Error::WeightsNotNormalized(sum));
        }
        Self::new(tickers, raw.iter().map(|w| w / sum).collect())
    }

    /// `1/n` on every ticker.
    pub fn equal(tickers: Vec<TickerId>) -> Result<Self> {
        let n = tickers.len();
        Self::new(tickers, vec![1.0 / n as f64; n])
    }

    pub fn tickers(&self) -> &[TickerId] {
        &self.tickers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_long_only(&self) -> bool {
        self.weights.iter().all(|w| *w >= 0.0)
    }

    pub fn weight_of(&self, ticker: &TickerId) -> Option<f64> {
        self.tickers
            .iter()
            .position(|t| t == ticker)
            .map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TickerId, f64)> {
        self.tickers.iter().zip(self.weights.iter().copied())
    }
}

/// One evaluated portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub weights: WeightVector,
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub sharpe: f64,
}

/// All sampled portfolios in generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSample {
    pub points: Vec<FrontierPoint>,
    pub seed: u64,
    pub risk_free_rate: f64,
}

/// A point picked out of a sample, with its generation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub point: FrontierPoint,
}

// ---------------------------------------------------------------------------
// Portfolio arithmetic
// ---------------------------------------------------------------------------

fn check_tickers(what: &str, expected: &[TickerId], got: &[TickerId]) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "{what}: ticker order differs ({} vs {} tickers)",
            expected.len(),
            got.len()
        )));
    }
    Ok(())
}

/// Weighted sum of per-ticker annual returns.
pub fn portfolio_return(weights: &WeightVector, stats: &AnnualStats) -> Result<f64> {
    check_tickers("portfolio_return", &stats.tickers, weights.tickers())?;
    Ok(weights
        .weights()
        .iter()
        .zip(&stats.annual_return)
        .map(|(w, r)| w * r)
        .sum())
}

/// Daily portfolio variance `w' S w`.
pub fn portfolio_variance(weights: &WeightVector, cov: &CovCorr) -> Result<f64> {
    check_tickers("portfolio_variance", &cov.tickers, weights.tickers())?;
    let w = DVector::from_column_slice(weights.weights());
    let var = w.dot(&(&cov.covariance * &w));
    // rounding on a PSD matrix can leave a tiny negative
    Ok(var.max(0.0))
}

/// `(return - risk_free) / volatility`.
pub fn sharpe_ratio(
    annual_return: f64,
    annual_volatility: f64,
    risk_free_rate: f64,
) -> Result<f64> {
    if annual_volatility.is_nan() || annual_volatility <= 0.0 {
        return Err(Error::ZeroVolatility);
    }
    Ok((annual_return - risk_free_rate) / annual_volatility)
}

/// Annual return, annual volatility and Sharpe ratio for `weights`.
pub fn evaluate(
    weights: WeightVector,
    stats: &AnnualStats,
    cov: &CovCorr,
    risk_free_rate: f64,
) -> Result<FrontierPoint> {
    let annual_return = portfolio_return(&weights, stats)?;
    let variance = portfolio_variance(&weights, cov)?;
    let annual_volatility = variance.sqrt() * f64::from(stats.trading_days).sqrt();
    let sharpe = sharpe_ratio(annual_return, annual_volatility, risk_free_rate)?;
    Ok(FrontierPoint {
        weights,
        annual_return,
        annual_volatility,
        sharpe,
    })
}

/// Every ticker weighted `1/n`.
pub fn equal_weight_portfolio(
    stats: &AnnualStats,
    cov: &CovCorr,
    risk_free_rate: f64,
) -> Result<FrontierPoint> {
    check_tickers("equal_weight_portfolio", &stats.tickers, &cov.tickers)?;
    let weights = WeightVector::equal(stats.tickers.clone())?;
    evaluate(weights, stats, cov, risk_free_rate)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// RNG for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simplex weights for sample `index`: `n` uniforms on (0, 1] divided by their sum.
pub fn sample_weights(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = sample_rng(seed, index);
    let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|u| u / sum).collect()
}

/// Samples `sample_count` random long-only portfolios.
pub fn sample_frontier(
    stats: &AnnualStats,
    cov: &CovCorr,
    sample_count: usize,
    seed: u64,
    risk_free_rate: f64,
) -> Result<FrontierSample> {
    check_tickers("sample_frontier", &stats.tickers, &cov.tickers)?;
    let n = stats.n_tickers();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "frontier sampling needs at least 2 tickers, got {n}"
        )));
    }
    if sample_count == 0 {
        return Err(Error::InvalidParameter(
            "sample_count must be positive".into(),
        ));
    }
    let points = (0..sample_count)
        .into_par_iter()
        .map(|k| {
            let w = WeightVector::new(stats.tickers.clone(), sample_weights(seed, k as u64, n))?;
            evaluate(w, stats, cov, risk_free_rate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontierSample {
        points,
        seed,
        risk_free_rate,
    })
}

/// Leftmost point: lowest volatility, then higher return, then lower index.
pub fn min_risk_portfolio(sample: &FrontierSample) -> Result<Selection> {
    select(&sample.points, |cand, best| {
        cand.annual_volatility < best.annual_volatility
            || (cand.annual_volatility == best.annual_volatility
                && cand.annual_return > best.annual_return)
    })
}

/// Highest Sharpe ratio, then lower volatility, then lower index.
pub fn opt_risk_portfolio(sample: &FrontierSample) -> Result<Selection> {
    select(&sample.points, |cand, best| {
        cand.sharpe > best.sharpe
            || (cand.sharpe == best.sharpe && cand.annual_volatility < best.annual_volatility)
    })
}

fn select(
    points: &[FrontierPoint],
    better: impl Fn(&FrontierPoint, &FrontierPoint) -> bool,
) -> Result<Selection> {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        if better(p, &points[best]) {
            best = i;
        }
    }
    points
        .get(best)
        .map(|p| Selection {
            index: best,
            point: p.clone(),
        })
        .ok_or(Error::EmptySample)
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Scatter CSV: `index,volatility,return,sharpe`.
pub fn frontier_csv(sample: &FrontierSample) -> String {
    let mut out = String::from("index,volatility,return,sharpe\n");
    for (i, p) in sample.points.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            p.annual_volatility, p.annual_return, p.sharpe
        ));
    }
    out
}

/// Sidecar describing the sample and the two selected portfolios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSidecar {
    pub seed: u64,
    pub sample_count: usize,
    pub risk_free_rate: f64,
    pub min_risk: Selection,
    pub opt_risk: Selection,
}

impl FrontierSidecar {
    pub fn from_sample(sample: &FrontierSample) -> Result<Self> {
        Ok(FrontierSidecar {
            seed: sample.seed,
            sample_count: sample.points.len(),
            risk_free_rate: sample.risk_free_rate,
            min_risk: min_risk_portfolio(sample)?,
            opt_risk: opt_risk_portfolio(sample)?,
        })
    }
}
