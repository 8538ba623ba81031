#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frontier_lab_core::ingest::{tickers, PricePanel, TickerId, UniverseConfig};

pub const SECTORS: [&str; 7] = [
    "auto",
    "banking",
    "consumer_durable",
    "fmcg",
    "healthcare",
    "it",
    "metal",
];

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn day(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn names(n: usize) -> Vec<TickerId> {
    let v: Vec<String> = (0..n).map(|i| format!("S{i:02}")).collect();
    tickers(&v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `rows x n` daily returns driven by one common factor plus noise.
pub fn factor_returns(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> DMatrix<f64> {
    let loading: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.5)).collect();
    let vol: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..0.03)).collect();
    let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-0.0005..0.001)).collect();
    let mut m = DMatrix::zeros(rows, n);
    for r in 0..rows {
        let f = normal(rng);
        for c in 0..n {
            let x = (loading[c] * f + normal(rng)) / (1.0 + loading[c] * loading[c]).sqrt();
            m[(r, c)] = drift[c] + vol[c] * x;
        }
    }
    m
}

/// Business-day-like consecutive dates starting at `start`.
pub fn dates_from(start: &str, rows: usize) -> Vec<NaiveDate> {
    let mut d = day(start);
    let mut out = Vec::with_capacity(rows);
    while out.len() < rows {
        if !matches!(d.format("%a").to_string().as_str(), "Sat" | "Sun") {
            out.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    out
}

/// Price panel compounding `factor_returns` from a random start level.
pub fn price_panel(seed: u64, rows: usize, n: usize) -> PricePanel {
    let mut rng = rng(seed);
    let rets = factor_returns(&mut rng, rows - 1, n);
    let mut closes = DMatrix::from_element(rows, n, None);
    for c in 0..n {
        let mut p = rng.random_range(20.0..2000.0);
        closes[(0, c)] = Some(p);
        for r in 1..rows {
            p *= 1.0 + rets[(r - 1, c)];
            closes[(r, c)] = Some(p);
        }
    }
    PricePanel::new(dates_from("2019-01-01", rows), names(n), closes).unwrap()
}

/// Config whose windows split `panel` at row `split` (training ends there,
/// holdout starts on the next date).
pub fn split_config(name: &str, panel: &PricePanel, split: usize) -> UniverseConfig {
    let d = panel.dates();
    UniverseConfig::new(
        name,
        panel.tickers().to_vec(),
        d[0],
        d[split],
        d[split + 1],
        d[d.len() - 1],
    )
    .unwrap()
}

pub fn sector_config(sector: &str) -> UniverseConfig {
    UniverseConfig::load(fixtures_dir().join(format!("{sector}.json"))).unwrap()
}

pub fn sector_panel(sector: &str) -> (UniverseConfig, PricePanel) {
    let config = sector_config(sector);
    let panel =
        frontier_lab_core::ingest::load_csv(fixtures_dir().join(format!("{sector}.csv")), &config)
            .unwrap();
    (config, panel)
}

/// Random symmetric positive-definite matrix `A A' + eps I`, scaled to daily
/// return magnitudes.
pub fn random_covariance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n + 2, |_, _| normal(rng) * 0.01);
    let mut s = &a * a.transpose();
    for i in 0..n {
        s[(i, i)] += 1e-5;
    }
    s
}
