"""Compress channel groups with convolutional autoencoders.

Each group trains its own autoencoder: conv blocks halve the width down
to a code, then upsampling mirrors the path back.  The code keeps most
of the reconstruction while shrinking the channel count handed to the
classifier.
"""
from __future__ import annotations

import numpy as np

from candlecast.autoencoder import build_autoencoder, decode, encode, train_autoencoder

rng = np.random.default_rng(5)
n, channels, width = 256, 6, 24

# correlated channels: a shared latent wave plus per-channel noise
phase = rng.uniform(0.0, 2.0 * np.pi, (n, 1, 1))
t = np.arange(width).reshape(1, 1, width)
latent = np.sin(2.0 * np.pi * t / 12.0 + phase)
mix = rng.normal(1.0, 0.3, (1, channels, 1))
batch = latent * mix + rng.normal(0.0, 0.05, (n, channels, width))

model = build_autoencoder(in_channels=channels, code_channels=2, width=width, seed=6)
print(f"autoencoder {channels} -> {model.mid_channels} -> 2 channels, "
      f"{model.parameter_count()} parameters")

history = train_autoencoder(model, batch, epochs=40, lr=3e-3, batch_size=32, seed=7)
print(f"reconstruction mse: {history[0]:.4f} epoch 1 -> {history[-1]:.4f} "
      f"epoch {len(history)}")

codes = encode(model, batch)
print(f"\ncode block: {codes.shape} "
      f"({channels} channels squeezed to {codes.shape[1]} at width {width})")

rebuilt = decode(model, codes)
err = np.mean((rebuilt - batch) ** 2)
var = np.var(batch)
print(f"reconstruction keeps {100.0 * (1.0 - err / var):.1f}% of the variance")
