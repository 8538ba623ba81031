mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;
use frontier_lab_core::backtest::{close_positions, open_positions, LedgerPolicy, Quotes};
use frontier_lab_core::eigen::{eigen_decompose, select_components, standardize};
use frontier_lab_core::frontier::{
    equal_weight_portfolio, min_risk_portfolio, opt_risk_portfolio, portfolio_variance,
    sample_frontier, sample_weights, WeightVector,
};
use frontier_lab_core::ingest::{clean_panel, parse_csv, PricePanel};
use frontier_lab_core::stats::{annualize, compute_returns, cov_corr, CovCorr, ReturnPanel};

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// Panel of `rows x n` prices with some cells knocked out.
fn holey_panel() -> impl Strategy<Value = PricePanel> {
    (4usize..30, 2usize..6)
        .prop_flat_map(|(rows, n)| {
            (
                Just(rows),
                Just(n),
                prop::collection::vec(prop::option::weighted(0.85, 1.0f64..500.0), rows * n),
            )
        })
        .prop_map(|(rows, n, cells)| {
            let closes = DMatrix::from_row_slice(rows, n, &cells);
            PricePanel::new(dates_from("2020-01-01", rows), names(n), closes).unwrap()
        })
}

fn return_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (5usize..40, 2usize..6).prop_flat_map(|(rows, n)| {
        prop::collection::vec(-0.1f64..0.1, rows * n)
            .prop_map(move |v| DMatrix::from_row_slice(rows, n, &v))
    })
}

fn returns_of(m: &DMatrix<f64>) -> ReturnPanel {
    ReturnPanel::from_simple(
        dates_from("2020-01-01", m.nrows()),
        names(m.ncols()),
        m.clone(),
    )
    .unwrap()
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn cleaning_is_idempotent(panel in holey_panel()) {
        if let Ok(once) = clean_panel(&panel) {
            let twice = clean_panel(&once.panel).unwrap();
            prop_assert_eq!(&twice.panel, &once.panel);
            prop_assert!(twice.dropped.is_empty());
            prop_assert!(twice.imputed.is_empty());
        }
    }

    #[test]
    fn cleaning_keeps_present_cells(panel in holey_panel()) {
        if let Ok(cleaned) = clean_panel(&panel) {
            prop_assert!(cleaned.panel.is_complete());
            prop_assert_eq!(cleaned.panel.dates(), panel.dates());
            for (c, t) in cleaned.panel.tickers().iter().enumerate() {
                let src = panel.ticker_index(t).unwrap();
                prop_assert!(panel.column_missing(src) * 4 <= panel.n_dates());
                for r in 0..panel.n_dates() {
                    if let Some(p) = panel.get(r, src) {
                        prop_assert_eq!(cleaned.panel.get(r, c), Some(p));
                    }
                }
            }
            for d in &cleaned.dropped {
                prop_assert!(d.missing * 4 > d.rows);
            }
        }
    }

    #[test]
    fn csv_round_trip(panel in holey_panel()) {
        let d = panel.dates();
        let config = frontier_lab_core::ingest::UniverseConfig::new(
            "rt",
            panel.tickers().to_vec(),
            d[0],
            d[1],
            d[1],
            d[d.len() - 1],
        )
        .unwrap();
        let text = panel.to_csv_string();
        let back = parse_csv(text.as_bytes(), &config).unwrap();
        prop_assert_eq!(back, panel);
    }
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn correlation_is_scale_invariant(m in return_matrix(), col in 0usize..6, scale in 0.01f64..100.0) {
        let col = col % m.ncols();
        let Ok(base) = cov_corr(&returns_of(&m)) else { return Ok(()) };
        let mut scaled = m.clone();
        scaled.column_mut(col).scale_mut(scale);
        let other = cov_corr(&returns_of(&scaled)).unwrap();
        prop_assert!(close(&base.correlation, &other.correlation, 1e-10));
        let ratio = other.covariance[(col, col)] / base.covariance[(col, col)];
        prop_assert!((ratio - scale * scale).abs() <= 1e-9 * scale * scale);
    }

    #[test]
    fn covariance_permutation_equivariant(m in return_matrix(), seed in any::<u64>()) {
        let n = m.ncols();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng(seed);
        for i in (1..n).rev() {
            perm.swap(i, rand::Rng::random_range(&mut r, 0..=i));
        }
        let Ok(base) = cov_corr(&returns_of(&m)) else { return Ok(()) };
        let permuted = DMatrix::from_fn(m.nrows(), n, |i, j| m[(i, perm[j])]);
        let other = cov_corr(&returns_of(&permuted)).unwrap();
        let expect = DMatrix::from_fn(n, n, |i, j| base.covariance[(perm[i], perm[j])]);
        prop_assert!(close(&other.covariance, &expect, 1e-12));
    }

    #[test]
    fn correlation_is_unit_diagonal_and_bounded(m in return_matrix()) {
        if let Ok(cc) = cov_corr(&returns_of(&m)) {
            for i in 0..cc.n_tickers() {
                prop_assert_eq!(cc.correlation[(i, i)], 1.0);
                for j in 0..cc.n_tickers() {
                    prop_assert!(cc.correlation[(i, j)].abs() <= 1.0 + 1e-12);
                    prop_assert_eq!(cc.correlation[(i, j)], cc.correlation[(j, i)]);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Frontier
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn sampled_weights_lie_on_simplex(seed in any::<u64>(), index in any::<u64>(), n in 1usize..40) {
        let w = sample_weights(seed, index, n);
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn variance_matches_double_loop(seed in any::<u64>(), n in 2usize..12) {
        let mut r = rng(seed);
        let cov = random_covariance(&mut r, n);
        let raw: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let shift = 1.0 - raw.iter().sum::<f64>();
        let mut w = raw.clone();
        w[0] += shift;
        let weights = WeightVector::new(names(n), w.clone()).unwrap();
        let cc = CovCorr::from_covariance(names(n), cov.clone()).unwrap();
        let fast = portfolio_variance(&weights, &cc).unwrap();
        let mut slow = 0.0;
        for i in 0..n {
            for j in 0..n {
                slow += w[i] * w[j] * cov[(i, j)];
            }
        }
        prop_assert!((fast - slow.max(0.0)).abs() <= 1e-10 * slow.abs().max(1e-300));
    }

    #[test]
    fn opt_risk_dominates_in_sharpe(seed in any::<u64>(), n in 2usize..8) {
        let panel = price_panel(seed, 120, n);
        let returns = compute_returns(&panel).unwrap();
        let stats = annualize(&returns, 250).unwrap();
        let cov = cov_corr(&returns).unwrap();
        let sample = sample_frontier(&stats, &cov, 300, seed ^ 0x5eed, 0.01).unwrap();
        let opt = opt_risk_portfolio(&sample).unwrap();
        let min = min_risk_portfolio(&sample).unwrap();
        prop_assert!(opt.point.sharpe >= min.point.sharpe);
        prop_assert!(sample.points.iter().all(|p| p.sharpe <= opt.point.sharpe));
        prop_assert!(sample.points.iter().all(|p| p.annual_volatility >= min.point.annual_volatility));
        let ew = equal_weight_portfolio(&stats, &cov, 0.01).unwrap();
        prop_assert!(ew.annual_volatility > 0.0);
    }
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pca_invariants(seed in any::<u64>(), n in 2usize..12) {
        let panel = price_panel(seed, 80, n);
        let returns = compute_returns(&panel).unwrap();
        let model = eigen_decompose(&standardize(&returns).unwrap()).unwrap();
        let nf = n as f64;
        prop_assert!((model.eigenvalues.iter().sum::<f64>() - nf).abs() <= 1e-8);
        let v = &model.eigenvectors;
        prop_assert!(close(&(v.transpose() * v), &DMatrix::identity(n, n), 1e-8));
        prop_assert!(close(&model.reconstruct(), &model.correlation, 1e-8));
        prop_assert!(model.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((model.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for k in 0..n {
            let s: f64 = v.column(k).sum();
            prop_assert!(s > 0.0 || (s == 0.0 && v[(v.column(k).iamax(), k)] > 0.0));
        }
        let k = select_components(&model, 0.8).unwrap();
        prop_assert!(model.cumulative_explained[k - 1] >= 0.8 - 1e-12);
        if k > 1 {
            prop_assert!(model.cumulative_explained[k - 2] < 0.8 - 1e-12);
        }
        prop_assert!(select_components(&model, 1.0).unwrap() <= n);
    }
}

// ---------------------------------------------------------------------------
// Backtest
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn backtest_return_ignores_capital(
        seed in any::<u64>(),
        n in 2usize..10,
        capital in 1.0f64..1e7,
        shorts in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let raw: Vec<f64> = (0..n)
            .map(|_| if shorts { normal(&mut r) } else { rand::Rng::random_range(&mut r, 0.01..1.0) })
            .collect();
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum.abs() > 0.1);
        let weights = WeightVector::normalized(names(n), &raw).unwrap();
        let entry: Quotes = names(n).into_iter().map(|t| (t, rand::Rng::random_range(&mut r, 1.0..5000.0))).collect();
        let exit: Quotes = entry.iter().map(|(t, p)| (t.clone(), p * rand::Rng::random_range(&mut r, 0.3..3.0))).collect();
        let run = |c: f64| {
            let open = open_positions(&weights, c, &entry, LedgerPolicy::default()).unwrap();
            close_positions(&open, &exit).unwrap()
        };
        let a = run(capital);
        let b = run(capital * 10.0);
        prop_assert!((a.total_return - b.total_return).abs() <= 1e-12);
        let by_hand: f64 = weights
            .iter()
            .map(|(t, w)| w * exit[t] / entry[t])
            .sum::<f64>() - 1.0;
        prop_assert!((a.total_return - by_hand).abs() <= 1e-12);
    }
}
