//! Eigen portfolios from the principal components of standardized daily returns.
//!
//! Returns are standardized per column, their sample covariance (the return
//! correlation matrix) is decomposed with a cyclic Jacobi solver, and each
//! leading eigenvector becomes a portfolio by dividing it by its entry sum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::{evaluate, WeightVector};
use crate::ingest::TickerId;
use crate::stats::{sample_covariance, AnnualStats, CovCorr, ReturnPanel};

/// Default cumulative explained-variance threshold for component selection.
pub const DEFAULT_THRESHOLD: f64 = 0.80;
/// Default number of eigen portfolios built.
pub const DEFAULT_PORTFOLIO_COUNT: usize = 5;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOLERANCE: f64 = 1e-10;
const MIN_COMPONENT_SUM: f64 = 1e-10;

/// Z-scored daily returns.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    pub tickers: Vec<TickerId>,
    /// `T x n`; every column has mean 0 and sample stdev 1.
    pub z_scores: DMatrix<f64>,
    pub column_means: Vec<f64>,
    pub column_stdevs: Vec<f64>,
}

/// Principal components of the return correlation matrix, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenModel {
    pub tickers: Vec<TickerId>,
    /// The matrix that was decomposed.
    pub correlation: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`. Each column's entry sum is
    /// positive (or, when it is zero, its largest-magnitude entry is).
    pub eigenvectors: DMatrix<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub cumulative_explained: Vec<f64>,
    /// Jacobi sweeps used.
    pub sweeps: usize,
}

impl EigenModel {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(lambda) V'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n_components();
        let lambda = DMatrix::from_fn(n, n, |i, j| if i == j { self.eigenvalues[i] } else { 0.0 });
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }
}

/// Portfolio built from one principal component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPortfolio {
    /// 0-based rank of the component.
    pub component_index: usize,
    pub eigenvalue: f64,
    /// Component loadings divided by their sum; may contain negative entries.
    pub weights: WeightVector,
    pub in_sample_return: f64,
    pub in_sample_volatility: f64,
    /// Sharpe ratio against the configured risk-free rate.
    pub sharpe: f64,
}

impl EigenPortfolio {
    /// Return over volatility, the score used to pick the best eigen portfolio.
    pub fn return_to_volatility(&self) -> f64 {
        self.in_sample_return / self.in_sample_volatility
    }
}

/// Z-scores each return column with its mean and sample stdev.
pub fn standardize(returns: &ReturnPanel) -> Result<StandardizedPanel> {
    let t = returns.n_periods();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "standardizing needs at least 2 periods, got {t}"
        )));
    }
    let mut z = returns.simple.clone();
    let mut means = Vec::with_capacity(z.ncols());
    let mut stdevs = Vec::with_capacity(z.ncols());
    for (c, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.mean();
        let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sd = (ss / (t - 1) as f64).sqrt();
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::DegenerateColumn(returns.tickers[c].to_string()));
        }
        col.apply(|x| *x = (*x - mean) / sd);
        means.push(mean);
        stdevs.push(sd);
    }
    Ok(StandardizedPanel {
        tickers: returns.tickers.clone(),
        z_scores: z,
        column_means: means,
        column_stdevs: stdevs,
    })
}

/// Symmetric eigen decomposition of the standardized-return covariance.
pub fn eigen_decompose(std: &StandardizedPanel) -> Result<EigenModel> {
    let (t, n) = std.z_scores.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 tickers, got {n}"
        )));
    }
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 periods, got {t}"
        )));
    }
    if t < n {
        log::warn!("only {t} observations for {n} tickers; correlation matrix is rank deficient");
    }
    let correlation = sample_covariance(&std.z_scores);
    decompose_symmetric(std.tickers.clone(), correlation)
}

/// Decomposes an already-formed correlation matrix.
pub fn decompose_correlation(
    tickers: Vec<TickerId>,
    correlation: DMatrix<f64>,
) -> Result<EigenModel> {
    let n = tickers.len();
    if correlation.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "correlation is {:?} for {n} tickers",
            correlation.shape()
        )));
    }
    decompose_symmetric(tickers, correlation)
}

fn decompose_symmetric(tickers: Vec<TickerId>, correlation: DMatrix<f64>) -> Result<EigenModel> {
    let n = correlation.nrows();
    let (values, vectors, sweeps) = jacobi_eigen(&correlation)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&k| {
            let v = values[k];
            // round-off below zero on a PSD matrix
            if v < 0.0 && v > -JACOBI_TOLERANCE * scale {
                0.0
            } else {
                v
            }
        })
        .collect();

    let mut eigenvectors = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    for mut col in eigenvectors.column_iter_mut() {
        let sum: f64 = col.iter().sum();
        let flip = if sum.abs() > 1e-12 {
            sum < 0.0
        } else {
            let mut big = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[big].abs() {
                    big = i;
                }
            }
            col[big] < 0.0
        };
        if flip {
            col.neg_mut();
        }
    }

    let explained_variance_ratio: Vec<f64> = eigenvalues.iter().map(|v| v / n as f64).collect();
    let cumulative_explained = explained_variance_ratio
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();

    Ok(EigenModel {
        tickers,
        correlation,
        eigenvalues,
        eigenvectors,
        explained_variance_ratio,
        cumulative_explained,
        sweeps,
    })
}

/// Cyclic Jacobi rotations. Returns unsorted eigenvalues, eigenvector columns,
/// and the number of sweeps performed.
fn jacobi_eigen(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, usize)> {
    let n = matrix.nrows();
    if !matrix.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericalFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = a.norm().max(f64::MIN_POSITIVE);

    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        if off(&a) <= f64::EPSILON * norm {
            break;
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let residual = off(&a);
    if residual > JACOBI_TOLERANCE * norm {
        return Err(Error::NumericalFailure(format!(
            "off-diagonal norm {residual:e} after {sweeps} sweeps"
        )));
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v, sweeps))
}

/// Smallest `k` whose cumulative explained variance reaches `threshold`.
pub fn select_components(model: &EigenModel, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let n = model.n_components();
    Ok(model
        .cumulative_explained
        .iter()
        .position(|c| *c >= threshold - 1e-12)
        .map_or(n, |i| i + 1))
}

/// Portfolios for the first `count` components, evaluated in-sample.
pub fn eigen_portfolios(
    model: &EigenModel,
    count: usize,
    stats: &AnnualStats,
    cov: &CovCorr,
    risk_free_rate: f64,
) -> Result<Vec<EigenPortfolio>> {
    let n = model.n_components();
    if count == 0 || count > n {
        return Err(Error::InvalidParameter(format!(
            "portfolio count must lie in 1..={n}, got {count}"
        )));
    }
    if model.tickers != stats.tickers {
        return Err(Error::DimensionMismatch(
            "eigen model and annual stats cover different tickers".into(),
        ));
    }
    (0..count)
        .map(|k| eigen_portfolio(model, k, stats, cov, risk_free_rate))
        .collect()
}

/// Portfolio for component `k` alone.
pub fn eigen_portfolio(
    model: &EigenModel,
    k: usize,
    stats: &AnnualStats,
    cov: &CovCorr,
    risk_free_rate: f64,
) -> Result<EigenPortfolio> {
    if k >= model.n_components() {
        return Err(Error::InvalidParameter(format!(
            "component {k} out of range for {} components",
            model.n_components()
        )));
    }
    let loadings: Vec<f64> = model.eigenvectors.column(k).iter().copied().collect();
    let sum: f64 = loadings.iter().sum();
    if sum.abs() < MIN_COMPONENT_SUM {
        return Err(Error::DegenerateComponent(k));
    }
    let weights = WeightVector::normalized(model.tickers.clone(), &loadings)
        .map_err(|_| Error::DegenerateComponent(k))?;
    let point = evaluate(weights, stats, cov, risk_free_rate)?;
    Ok(EigenPortfolio {
        component_index: k,
        eigenvalue: model.eigenvalues[k],
        weights: point.weights,
        in_sample_return: point.annual_return,
        in_sample_volatility: point.annual_volatility,
        sharpe: point.sharpe,
    })
}

/// Highest return/volatility ratio; ties go to the lowest component index.
pub fn best_eigen_portfolio(portfolios: &[EigenPortfolio]) -> Result<EigenPortfolio> {
    let mut best: Option<&EigenPortfolio> = None;
    for p in portfolios {
        best = match best {
            None => Some(p),
            Some(b) => {
                let (ps, bs) = (p.return_to_volatility(), b.return_to_volatility());
                if ps > bs || (ps == bs && p.component_index < b.component_index) {
                    Some(p)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.cloned().ok_or(Error::EmptyList)
}

/// Scree CSV: `component,explained_ratio,cumulative` (0-based components).
pub fn scree_csv(model: &EigenModel) -> String {
    let mut out = String::from("component,explained_ratio,cumulative\n");
    for (k, (r, c)) in model
        .explained_variance_ratio
        .iter()
        .zip(&model.cumulative_explained)
        .enumerate()
    {
        out.push_str(&format!("{k},{r},{c}\n"));
    }
    out
}

/// Weight CSV: `component,ticker,weight`.
pub fn eigen_weights_csv(portfolios: &[EigenPortfolio]) -> String {
    let mut out = String::from("component,ticker,weight\n");
    for p in portfolios {
        for (t, w) in p.weights.iter() {
            out.push_str(&format!("{},{t},{w}\n", p.component_index));
        }
    }
    out
}
