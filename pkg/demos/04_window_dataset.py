"""Cut a feature table into labeled 24-candle windows.

Each instance stacks every channel over the last 24 candles and carries
the direction of the following close as its label.  Price channels
normalize against the window's last close; the rest are z-scored with
statistics fitted on the training split only.
"""
from __future__ import annotations

import numpy as np

from candlecast.dataset import (fit_norm_stats, make_windows, normalize,
                                split_channels)
from candlecast.feature_select import GbdtConfig, fit_gbdt, select_top_k
from candlecast.dataset import direction_labels
from candlecast.indicators import default_grid, generate_features
from candlecast.synthetic import sine_market

series = sine_market(n=700, seed=7)
table = generate_features(series, default_grid((7, 14)))
closes = series.close[len(series) - len(table):]

# keep it small: the five raw columns plus the eight best generated ones
labels = direction_labels(closes)
model = fit_gbdt(table.values[:-1], labels, GbdtConfig(rounds=30),
                 feature_names=table.names)
table = select_top_k(table, model, k=8)

ds = make_windows(table, closes, window=24, stride=1)
print(f"{len(ds)} instances of shape {ds.X.shape[1:]} "
      f"(channels x 1 x window), {int(ds.y.sum())} labeled up")
print(f"channel order: {ds.channel_names}")

ds.set_train_boundary(int(len(table) * 0.8))
print(f"train/test split: {ds.n_train} / {len(ds) - ds.n_train}")

stats = fit_norm_stats(ds)
ds = normalize(ds, stats)
ohlcv, price, non_price = split_channels(ds)
print(f"\ngroups: ohlcv {ohlcv.shape[1]}, price-like {price.shape[1]}, "
      f"non-price-like {non_price.shape[1]} channels")

# price channels end near zero because the last close is the anchor
close_ch = ds.channel("close")
print(f"normalized close channel, last position: "
      f"mean {ds.X[:, close_ch, 0, -1].mean():.3f} (exactly 0 by construction)")
print(f"z-scored volume channel: train mean "
      f"{ds.X[:ds.n_train, ds.channel('volume'), 0, :].mean():+.3f}, "
      f"std {ds.X[:ds.n_train, ds.channel('volume'), 0, :].std():.3f}")
