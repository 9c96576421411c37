"""Rank indicator columns with gradient-boosted trees.

The trees fit next-candle direction; summed split gains give each column
an importance score.  Selection keeps the five raw candle columns no
matter what and adds the top-k generated columns.
"""
from __future__ import annotations

import numpy as np

from candlecast.dataset import direction_labels
from candlecast.feature_select import GbdtConfig, fit_gbdt, rank_features, select_top_k
from candlecast.indicators import default_grid, generate_features
from candlecast.synthetic import sine_market

series = sine_market(n=800, seed=7)
table = generate_features(series, default_grid((7, 14, 21, 35, 50)))
closes = series.close[len(series) - len(table):]

# labels pair row t with the close one row later, so the last row has none
labels = direction_labels(closes)
print(f"{len(table)} rows, {len(table.names)} columns, "
      f"{int(labels.sum())} of {labels.size} candles closed higher")

model = fit_gbdt(table.values[:-1], labels, GbdtConfig(rounds=60),
                 feature_names=table.names)
print(f"logistic loss: {model.loss_history[0]:.4f} round 1 "
      f"-> {model.loss_history[-1]:.4f} round {len(model.loss_history)}")

print("\ntop 10 columns by split gain:")
ranking = rank_features(model)
importance = model.importance_by_name()
for name in ranking[:10]:
    print(f"  {name:<16} {importance[name]:10.2f}")

picked = select_top_k(table, model, k=10)
raw = [n for n in picked.names if n in ("open", "high", "low", "close", "volume")]
print(f"\nselect_top_k(k=10) keeps {len(picked.names)} columns: "
      f"{len(raw)} raw + 10 generated")
