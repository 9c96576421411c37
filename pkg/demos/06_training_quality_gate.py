"""Train the direction classifier and read its quality gate.

The trainer reports loss in base 10; sigma* = 10^(-loss_10) is the
geometric-mean probability the model assigns to the true direction.
Training stops early only when the loss has flattened AND sigma* clears
zeta; a flat-but-poor model runs to the epoch cap and comes back
under-fitted.
"""
from __future__ import annotations

import numpy as np

from candlecast.classifier import build_classifier, predict_batch
from candlecast.trainer import TrainConfig, sigma_star, train_classifier

rng = np.random.default_rng(11)
n, window = 600, 6

# group channels with a planted signal in the first ohlcv channel
ohlcv = rng.normal(size=(n, 2, window))
side = np.where(rng.random(n) < 0.5, 1.0, -1.0)
ohlcv[:, 0, :] = rng.normal(scale=0.3, size=(n, window)) + side[:, None]
price = rng.normal(size=(n, 1, window))
non_price = rng.normal(size=(n, 1, window))
y = (ohlcv[:, 0, :].mean(axis=1) > 0.0).astype(float)

model = build_classifier(2, 1, 1, window, seed=12, hidden_size=6,
                         branch_channels=4, dropout_rate=0.0)
config = TrainConfig(zeta=0.8, max_epochs=300, learning_rate=2e-2, batch_size=64)
report = train_classifier(model, ohlcv, price, non_price, y, config, seed=13)

print(f"verdict: {report.status} after {report.epochs_run} epochs")
print(f"final loss_e {report.loss_e:.4f}, loss_10 {report.loss_10:.4f}, "
      f"sigma* {report.sigma_star:.4f} (zeta {config.zeta})")
print("\nepoch  loss_10  sigma*")
marks = sorted({1, 2, 5, len(report.history) // 2, len(report.history)})
for epoch in marks:
    _, l10, star = report.history[epoch - 1]
    print(f"{epoch:>5}  {l10:.4f}   {star:.4f}")

sigma = predict_batch(model, ohlcv, price, non_price)
print(f"\ntrain accuracy {np.mean((sigma >= 0.5) == (y == 1.0)):.3f}")

# the same architecture on shuffled labels has nothing to learn
noise = np.random.default_rng(14).permutation(y)
model = build_classifier(2, 1, 1, window, seed=12, hidden_size=6,
                         branch_channels=4, dropout_rate=0.0)
config = TrainConfig(zeta=0.8, max_epochs=30, learning_rate=2e-2, batch_size=64)
report = train_classifier(model, ohlcv, price, non_price, noise, config, seed=13)
print(f"\nshuffled labels: {report.status}, sigma* {report.sigma_star:.4f} "
      f"(a coin-flip model sits at {sigma_star(np.log10(2.0)):.4f})")
