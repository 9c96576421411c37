"""Walk the trading rule through a small hand-checkable path.

theta sets the action bands Upper = 1/(1+theta), Lower = theta/(1+theta);
the bet is |sigma - 0.5| of the margin.  Profit saving banks each trade's
PnL and keeps betting off the initial margin; compounding lets the
account grow or shrink the bets.
"""
from __future__ import annotations

import numpy as np

from candlecast.strategy import StrategyConfig, bet_size, run_backtest, thresholds

for theta in (1.0, 1.0 / 3.0, 0.25):
    upper, lower = thresholds(theta)
    print(f"theta {theta:.3f}: long at sigma >= {upper:.3f}, "
          f"short at sigma <= {lower:.3f}")
print(f"bet size at sigma 0.1: {bet_size(0.1):.1f} of margin\n")

closes = [100.0, 110.0, 99.0, 89.1, 93.555, 98.0, 102.9, 100.0, 95.0, 99.75, 94.7625]
sigmas = [0.80, 0.90, 0.10, 0.50, 0.75, 0.25, 0.60, 0.20, 0.74, 0.85]
labels = [1.0 if closes[t + 1] > closes[t] else 0.0 for t in range(10)]

config = StrategyConfig(theta=1.0 / 3.0, fee_rate=0.001, profit_saving=True,
                        initial_margin=1000.0)
report = run_backtest(sigmas, closes, labels, config)

print("t  sigma  side      margin    entry    exit      pnl   account")
for row in report.ledger:
    print(f"{row.t}  {row.sigma:.2f}   {row.direction:<8} {row.margin:8.2f} "
          f"{row.entry:8.2f} {row.exit:8.2f} {row.pnl:8.2f} {row.account:9.2f}")

print(f"\nconfusion tp {report.tp}, fp {report.fp}, tn {report.tn}, fn {report.fn} "
      f"-> accuracy {report.accuracy:.3f}")
print(f"profit saving: {report.pnl_profit_saving:+.2f}% "
      f"(final {report.final_profit_saving:.2f})")
print(f"compounding:   {report.pnl_compounding:+.2f}% "
      f"(final {report.final_compounding:.2f})")

# a sharper sigma stream turns theta down into fewer, more confident trades
rng = np.random.default_rng(7)
drift = rng.normal(0.0005, 0.01, 400)
path = 100.0 * np.exp(np.cumsum(drift))
closes = np.concatenate([[100.0], path])
truth = (closes[1:] > closes[:-1]).astype(float)
sigma = np.clip(0.5 + 0.35 * np.where(truth == 1.0, 1.0, -1.0)
                + rng.normal(0.0, 0.25, 400), 0.01, 0.99)
print("\ntheta   trades  accuracy  saving%  compounding%")
for theta in (1.0, 0.5, 1.0 / 3.0, 0.25):
    cfg = StrategyConfig(theta=theta, fee_rate=0.001, profit_saving=True,
                         initial_margin=1000.0)
    rep = run_backtest(sigma, closes, truth, cfg)
    print(f"{theta:<7.3f} {rep.trades:>5}   {rep.accuracy:.3f}   "
          f"{rep.pnl_profit_saving:+8.1f} {rep.pnl_compounding:+12.1f}")
