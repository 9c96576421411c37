"""Build a synthetic market and read indicator columns off it.

The sine market is a deterministic price path: a seeded sinusoid with a
little noise, aggregated into 4-hour candles.  Indicators drop their
warm-up rows, so the feature table is shorter than the series.
"""
from __future__ import annotations

import numpy as np

from candlecast.indicators import default_grid, generate_features
from candlecast.synthetic import sine_market

series = sine_market(n=600, seed=7)
print(f"{series.symbol}: {len(series)} candles, timeframe {series.timeframe}s")
print(f"close range [{series.close.min():.2f}, {series.close.max():.2f}]")

grid = default_grid((7, 14, 21, 35, 50))
print(f"\nindicator grid: {len(grid)} specs, e.g. {[str(s) for s in grid[:4]]}")

table = generate_features(series, grid)
print(f"feature table: {len(table)} rows x {len(table.names)} columns "
      f"({len(series) - len(table)} warm-up rows dropped)")

# price-like columns live on the price axis, non-price-like ones are unitless
classes = {}
for name, cls in zip(table.names, table.classes):
    classes.setdefault(cls.value, []).append(name)
for value, names in sorted(classes.items()):
    print(f"\n{value} ({len(names)}): {', '.join(names[:8])}"
          + (" ..." if len(names) > 8 else ""))

# a moving average tracks the close with a lag
close = table.column("close")
ema = table.column("ema_21")
print(f"\nclose[-5:]  = {np.round(close[-5:], 3)}")
print(f"ema_21[-5:] = {np.round(ema[-5:], 3)}")
print(f"mean |close - ema_21| = {np.mean(np.abs(close - ema)):.4f}")

rsi = table.column("rsi_14")
print(f"\nrsi_14 stays inside [0, 100]: min {rsi.min():.1f}, max {rsi.max():.1f}")
