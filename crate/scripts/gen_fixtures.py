#!/usr/bin/env python3
"""Generate the sector fixture panels and ledgers under fixtures/.

Inputs come from scripts/sector_data.json. Each sector panel is synthetic
but pinned to those figures:

* daily simple returns over the training window have exactly the listed
  annual return (mean x 250) and annual volatility (sample stdev x sqrt(250));
* the return correlation matrix has an engineered spectrum whose first
  seven components explain `cumulative_at_7` of the variance while six fall
  short of 80%;
* closes on the last training day and on the holdout entry day equal the
  entry price, and the holdout exit day closes at the exit price.

Usage: python3 scripts/gen_fixtures.py [sector_data.json] [fixtures/]
"""

import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import random_correlation

TRADING_DAYS = 250
TRAIN_START, TRAIN_END = "2016-01-01", "2020-12-31"
TEST_START, TEST_END = "2021-01-01", "2021-07-01"
BASE_SEED = 20_160_101


def spectrum(c7, n=10, step=0.02, margin=0.05):
    """Eigenvalues summing to n with cumulative share c7 at k=7 and < 0.8 at k=6."""
    tail = (n - n * c7) / 3.0
    l7 = max(tail, n * c7 - 0.8 * n) + margin
    mid = [l7 + step * (6 - i) for i in range(1, 6)]
    l1 = n * c7 - l7 - sum(mid)
    eig = np.array([l1] + mid + [l7] + [tail] * 3)
    assert np.all(np.diff(eig) <= 0), eig
    cum = np.cumsum(eig) / n
    assert cum[5] < 0.8 - 1e-3 and abs(cum[6] - c7) < 1e-12, cum
    return eig


def exact_factor(rng, m, corr):
    """m x n draws whose sample mean is 0 and sample correlation is exactly `corr`."""
    n = corr.shape[0]
    z = rng.standard_normal((m, n))
    z -= z.mean(axis=0)
    s = np.cov(z, rowvar=False)
    w, v = np.linalg.eigh(s)
    z = z @ (v @ np.diag(w ** -0.5) @ v.T)
    return z @ np.linalg.cholesky(corr).T


def bridge(rng, start, end, steps, vol):
    """Log-price Brownian bridge from `start` to `end` over `steps` intervals."""
    walk = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, vol, steps))])
    t = np.linspace(0.0, 1.0, steps + 1)
    walk -= t * walk[-1]
    path = np.log(start) + t * (np.log(end) - np.log(start)) + walk
    out = np.exp(path)
    out[0], out[-1] = start, end
    return out


def build_sector(slug, data, seed, dates):
    stocks = data["stocks"]
    symbols = [s["symbol"] for s in stocks]
    rng = np.random.default_rng(seed)
    train = dates[dates <= pd.Timestamp(TRAIN_END)]
    test = dates[dates >= pd.Timestamp(TEST_START)]
    m = len(train) - 1

    corr = random_correlation.rvs(spectrum(data["cumulative_at_7"]), random_state=rng)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    x = exact_factor(rng, m, corr)

    mu = np.array([s["annual_return"] for s in stocks]) / TRADING_DAYS
    sigma = np.array([s["annual_volatility"] for s in stocks]) / np.sqrt(TRADING_DAYS)
    returns = mu + x * sigma
    assert returns.min() > -0.9, slug

    entry = np.array(data["entry_price"])
    exit_ = np.array(data["exit_price"])
    growth = np.vstack([np.ones(len(symbols)), np.cumprod(1.0 + returns, axis=0)])
    train_px = growth / growth[-1] * entry

    test_px = np.column_stack([
        bridge(rng, entry[j], exit_[j], len(test) - 1, sigma[j]) for j in range(len(symbols))
    ])

    panel = pd.DataFrame(
        np.vstack([train_px, test_px]),
        index=pd.DatetimeIndex(list(train) + list(test)),
        columns=symbols,
    )
    panel.index.name = "date"

    config = {
        "sector_name": slug,
        "tickers": symbols,
        "train_start": TRAIN_START,
        "train_end": TRAIN_END,
        "test_start": TEST_START,
        "test_end": TEST_END,
    }
    ledgers = []
    for kind in ("opt", "eigen"):
        rows = [
            {
                "name": s["name"],
                "entry_price": p_in,
                "invested": amount,
                "exit_price": p_out,
                "ticker": s["symbol"],
            }
            for s, p_in, amount, p_out in zip(
                stocks, data["entry_price"], data["invested"][kind], data["exit_price"]
            )
        ]
        ledgers.append({
            "sector": slug,
            "portfolio": kind,
            "expected_return_pct": data["holdout_return_pct"][kind],
            "rows": rows,
        })
    targets = {
        "cumulative_at_7": data["cumulative_at_7"],
        "names": {s["symbol"]: s["name"] for s in stocks},
        "annual_return": {s["symbol"]: s["annual_return"] for s in stocks},
        "annual_volatility": {s["symbol"]: s["annual_volatility"] for s in stocks},
    }
    return panel, config, ledgers, targets


def main():
    here = Path(__file__).resolve().parent
    source = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "sector_data.json"
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else here.parent / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    sectors = json.loads(source.read_text())
    dates = pd.bdate_range(TRAIN_START, TEST_END)

    all_ledgers, all_targets = [], {}
    for i, (slug, data) in enumerate(sectors.items()):
        panel, config, ledgers, targets = build_sector(slug, data, BASE_SEED + i, dates)
        panel.to_csv(out / f"{slug}.csv", float_format="%.10g", date_format="%Y-%m-%d")
        (out / f"{slug}.json").write_text(json.dumps(config, indent=2) + "\n")
        all_ledgers.extend(ledgers)
        all_targets[slug] = targets
    (out / "ledgers.json").write_text(json.dumps(all_ledgers, indent=2) + "\n")
    (out / "targets.json").write_text(json.dumps(all_targets, indent=2) + "\n")


if __name__ == "__main__":
    main()
