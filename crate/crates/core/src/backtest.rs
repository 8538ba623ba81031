//! Buy-and-hold holdout backtest: weights and capital become a share ledger at
//! the first test date, valued again at the last test date.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontier::WeightVector;
use crate::ingest::{PricePanel, TickerId, UniverseConfig};

/// Default invested capital.
pub const DEFAULT_CAPITAL: f64 = 100_000.0;

/// Prices keyed by ticker.
pub type Quotes = BTreeMap<TickerId, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareMode {
    /// Fractional share counts.
    #[default]
    Fractional,
    /// Share counts truncated toward zero; the remainder is held as cash.
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerPolicy {
    /// Reject negative weights instead of opening short positions.
    pub long_only: bool,
    pub share_mode: ShareMode,
}

/// A position opened at the entry date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub ticker: TickerId,
    pub weight: f64,
    pub entry_price: f64,
    pub amount_invested: f64,
    /// Negative for short positions.
    pub share_count: f64,
}

/// Ledger after [`open_positions`], before valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLedger {
    pub capital: f64,
    pub positions: Vec<Position>,
    /// Uninvested cash (non-zero only in whole-share mode).
    pub residual_cash: f64,
}

impl OpenLedger {
    pub fn has_short(&self) -> bool {
        self.positions.iter().any(|p| p.share_count < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub ticker: TickerId,
    pub weight: f64,
    pub entry_price: f64,
    pub amount_invested: f64,
    pub share_count: f64,
    /// `None` only for tickers with no shares and no quote.
    pub exit_price: Option<f64>,
    pub terminal_value: f64,
}

/// Completed ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestLedger {
    pub capital: f64,
    pub entries: Vec<LedgerEntry>,
    pub residual_cash: f64,
    /// Sum of terminal values plus residual cash.
    pub total_terminal: f64,
    /// `total_terminal / capital - 1`.
    pub total_return: f64,
    /// Set when any position is short.
    pub has_short: bool,
    pub entry_date: Option<NaiveDate>,
    pub exit_date: Option<NaiveDate>,
}

fn check_price(ticker: &TickerId, price: f64) -> Result<f64> {
    if price.is_finite() && price > 0.0 {
        Ok(price)
    } else {
        Err(Error::InvalidPrice {
            ticker: ticker.to_string(),
            price,
        })
    }
}

/// Allocates `capital` across `weights` at the given entry prices.
pub fn open_positions(
    weights: &WeightVector,
    capital: f64,
    entry_prices: &Quotes,
    policy: LedgerPolicy,
) -> Result<OpenLedger> {
    if !(capital.is_finite() && capital > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "capital must be positive, got {capital}"
        )));
    }
    let mut positions = Vec::with_capacity(weights.len());
    for (ticker, weight) in weights.iter() {
        if policy.long_only && weight < 0.0 {
            return Err(Error::NegativeWeightNotAllowed {
                ticker: ticker.to_string(),
                weight,
            });
        }
        let price = entry_prices
            .get(ticker)
            .copied()
            .ok_or_else(|| Error::MissingEntryPrice(ticker.to_string()))
            .and_then(|p| check_price(ticker, p))?;
        let target = capital * weight;
        let (amount_invested, share_count) = match policy.share_mode {
            ShareMode::Fractional => (target, target / price),
            ShareMode::Whole => {
                let shares = (target / price).trunc();
                (shares * price, shares)
            }
        };
        positions.push(Position {
            ticker: ticker.clone(),
            weight,
            entry_price: price,
            amount_invested,
            share_count,
        });
    }
    let residual_cash = match policy.share_mode {
        ShareMode::Fractional => 0.0,
        ShareMode::Whole => capital - positions.iter().map(|p| p.amount_invested).sum::<f64>(),
    };
    Ok(OpenLedger {
        capital,
        positions,
        residual_cash,
    })
}

/// Values every held position at `exit_prices`.
pub fn close_positions(ledger: &OpenLedger, exit_prices: &Quotes) -> Result<BacktestLedger> {
    let mut entries = Vec::with_capacity(ledger.positions.len());
    for p in &ledger.positions {
        let quote = exit_prices.get(&p.ticker).copied();
        let (exit_price, terminal_value) = match quote {
            Some(price) => {
                let price = check_price(&p.ticker, price)?;
                (Some(price), p.share_count * price)
            }
            None if p.share_count == 0.0 => (None, 0.0),
            None => return Err(Error::MissingExitPrice(p.ticker.to_string())),
        };
        entries.push(LedgerEntry {
            ticker: p.ticker.clone(),
            weight: p.weight,
            entry_price: p.entry_price,
            amount_invested: p.amount_invested,
            share_count: p.share_count,
            exit_price,
            terminal_value,
        });
    }
    let total_terminal =
        entries.iter().map(|e| e.terminal_value).sum::<f64>() + ledger.residual_cash;
    Ok(BacktestLedger {
        capital: ledger.capital,
        entries,
        residual_cash: ledger.residual_cash,
        total_terminal,
        total_return: total_terminal / ledger.capital - 1.0,
        has_short: ledger.has_short(),
        entry_date: None,
        exit_date: None,
    })
}

/// Backtests over the config's test window.
pub fn run_backtest(
    panel: &PricePanel,
    weights: &WeightVector,
    capital: f64,
    config: &UniverseConfig,
    policy: LedgerPolicy,
) -> Result<BacktestLedger> {
    run_backtest_window(
        panel,
        weights,
        capital,
        config.test_start,
        config.test_end,
        policy,
    )
}

/// Enters at the first date on or after `start`, exits at the last date on or
/// before `end`.
pub fn run_backtest_window(
    panel: &PricePanel,
    weights: &WeightVector,
    capital: f64,
    start: NaiveDate,
    end: NaiveDate,
    policy: LedgerPolicy,
) -> Result<BacktestLedger> {
    let entry_row = panel
        .first_row_on_or_after(start)
        .filter(|&r| panel.dates()[r] <= end)
        .ok_or_else(|| Error::WindowNotCovered(format!("no trading date in [{start}, {end}]")))?;
    let exit_row = panel
        .last_row_on_or_before(end)
        .filter(|&r| r >= entry_row)
        .ok_or_else(|| Error::WindowNotCovered(format!("no trading date in [{start}, {end}]")))?;

    let quotes = |row: usize, missing: fn(String) -> Error| -> Result<Quotes> {
        weights
            .tickers()
            .iter()
            .map(|t| {
                panel
                    .ticker_index(t)
                    .and_then(|c| panel.get(row, c))
                    .map(|p| (t.clone(), p))
                    .ok_or_else(|| missing(t.to_string()))
            })
            .collect()
    };
    let entry = quotes(entry_row, Error::MissingEntryPrice)?;
    let exit = quotes(exit_row, Error::MissingExitPrice)?;

    let open = open_positions(weights, capital, &entry, policy)?;
    let mut ledger = close_positions(&open, &exit)?;
    ledger.entry_date = Some(panel.dates()[entry_row]);
    ledger.exit_date = Some(panel.dates()[exit_row]);
    Ok(ledger)
}

/// Ledger CSV with a trailing `TOTAL` row.
pub fn ledger_csv(ledger: &BacktestLedger) -> String {
    let mut out =
        String::from("ticker,entry_price,amount_invested,share_count,exit_price,terminal_value\n");
    for e in &ledger.entries {
        let exit = e.exit_price.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{exit},{}\n",
            e.ticker, e.entry_price, e.amount_invested, e.share_count, e.terminal_value
        ));
    }
    if ledger.residual_cash != 0.0 {
        out.push_str(&format!(
            "CASH,,{},,,{}\n",
            ledger.residual_cash, ledger.residual_cash
        ));
    }
    out.push_str(&format!(
        "TOTAL,,{},,,{}\n",
        ledger.capital, ledger.total_terminal
    ));
    out
}
