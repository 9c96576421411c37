"""Direction classifier: three conv branches -> LSTM -> dense head -> sigma.

Each channel group (raw candles, price-like codes, non-price-like codes)
passes through its own branch: MaxPool(3,3) shrinks the width to
window/3, then two width-preserving Conv1d+ReLU stages lift the group to
a common channel count.  Branch outputs are concatenated on channels and
read as a sequence of length window/3 whose per-step feature vector is
the concatenated channel column; a many-to-one LSTM (hidden 20) summarizes
the sequence, and a dense 20->10 ReLU layer with dropout 0.3 plus a final
dense 10->1 sigmoid produce sigma in (0,1), the probability that the next
close rises.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError, UntrainedModelError
from .nn import (Conv1d, ConvSpec, Dense, LstmCell, Tensor, as_tensor, concat,
                 dropout, lstm_many_to_one, maxpool1d, relu, sigmoid)


class _Branch:
    def __init__(self, in_channels: int, out_channels: int, rng, name: str):
        self.conv1 = Conv1d(ConvSpec(in_channels, out_channels, 3, 1, 1), rng,
                            name=f"{name}.conv1")
        self.conv2 = Conv1d(ConvSpec(out_channels, out_channels, 3, 1, 1), rng,
                            name=f"{name}.conv2")

    def __call__(self, x: Tensor) -> Tensor:
        pooled = maxpool1d(x, 3, 3)
        return relu(self.conv2(relu(self.conv1(pooled))))

    def parameters(self) -> dict:
        return {**self.conv1.parameters(), **self.conv2.parameters()}


class ClassifierModel:
    def __init__(self, ohlcv_channels: int, price_channels: int,
                 non_price_channels: int, window: int, rng: np.random.Generator,
                 hidden_size: int = 20, branch_channels: int = 8,
                 dropout_rate: float = 0.3, name: str = "clf"):
        if window % 3:
            raise ConfigError(f"window {window} is not divisible by 3; the branch "
                              "pooling needs a window like 24")
        for label, c in (("ohlcv", ohlcv_channels), ("price", price_channels),
                         ("non_price", non_price_channels)):
            if c < 1:
                raise ConfigError(f"{label} branch needs at least 1 channel, got {c}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {dropout_rate}")
        self.window = int(window)
        self.seq_len = window // 3
        self.group_channels = (int(ohlcv_channels), int(price_channels), int(non_price_channels))
        self.branch_channels = int(branch_channels)
        self.hidden_size = int(hidden_size)
        self.dropout_rate = float(dropout_rate)
        self.name = name
        self.branches = (
            _Branch(ohlcv_channels, branch_channels, rng, f"{name}.ohlcv"),
            _Branch(price_channels, branch_channels, rng, f"{name}.price"),
            _Branch(non_price_channels, branch_channels, rng, f"{name}.non_price"),
        )
        self.lstm = LstmCell(3 * branch_channels, hidden_size, rng, name=f"{name}.lstm")
        self.fc1 = Dense(hidden_size, 10, rng, name=f"{name}.fc1")
        self.fc2 = Dense(10, 1, rng, name=f"{name}.fc2")
        self.trained = False

    def parameters(self) -> dict:
        out = {}
        for b in self.branches:
            out.update(b.parameters())
        out.update(self.lstm.parameters())
        out.update(self.fc1.parameters())
        out.update(self.fc2.parameters())
        return out

    def zero_head(self) -> None:
        """Zero both head layers; the output becomes exactly 0.5 everywhere."""
        for layer in (self.fc1, self.fc2):
            layer.weight.data[:] = 0.0
            layer.bias.data[:] = 0.0


def _group_tensor(x, channels: int, window: int, label: str) -> Tensor:
    x = as_tensor(x)
    if x.ndim == 4:
        if x.shape[2] != 1:
            raise DataError(f"{label}: 4-d input must have height 1, got {x.shape}")
        x = x.reshape(x.shape[0], x.shape[1], x.shape[3])
    if x.ndim != 3:
        raise DataError(f"{label}: expected (batch, channels, width), got {x.shape}")
    if x.shape[1] != channels:
        raise DataError(f"{label}: expected {channels} channels, got {x.shape[1]}")
    if x.shape[2] != window:
        raise DataError(f"{label}: expected width {window}, got {x.shape[2]}")
    return x


def forward(model: ClassifierModel, ohlcv, price_code, non_price_code,
            training: bool = False, rng: np.random.Generator | int = 0) -> Tensor:
    """Probability that the next close rises, per instance: Tensor (batch,).

    ``training`` switches dropout on; pass a generator (or seed) to make the
    masks reproducible.
    """
    groups = []
    batch = None
    for x, channels, label in zip((ohlcv, price_code, non_price_code),
                                  model.group_channels,
                                  ("ohlcv", "price_code", "non_price_code")):
        t = _group_tensor(x, channels, model.window, label)
        if batch is None:
            batch = t.shape[0]
        elif t.shape[0] != batch:
            raise DataError(f"{label}: batch {t.shape[0]} != {batch}")
        groups.append(t)
    stacked = concat([b(g) for b, g in zip(model.branches, groups)], axis=1)
    sequence = stacked.transpose(0, 2, 1)        # (batch, seq_len, 3*branch_channels)
    summary = lstm_many_to_one(model.lstm, sequence)
    hidden = relu(model.fc1(summary))
    hidden = dropout(hidden, model.dropout_rate, rng, training=training)
    logit = model.fc2(hidden)
    return sigmoid(logit.reshape(batch))


def predict_batch(model: ClassifierModel, ohlcv, price_code, non_price_code,
                  chunk: int = 512) -> np.ndarray:
    """Deterministic inference over aligned group batches; dropout off.

    Chunking bounds memory; a fixed chunk size gives bit-identical output
    run to run (chunk size itself only reorders BLAS accumulation).
    """
    if not model.trained:
        raise UntrainedModelError("classifier has not been trained; "
                                  "run the training loop first")
    n = np.asarray(ohlcv).shape[0]
    out = np.empty(n)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        out[sl] = forward(model,
                          np.asarray(ohlcv)[sl],
                          np.asarray(price_code)[sl],
                          np.asarray(non_price_code)[sl],
                          training=False).data
    return out


def build_classifier(ohlcv_channels: int, price_channels: int, non_price_channels: int,
                     window: int, seed: int | np.random.Generator = 0,
                     hidden_size: int = 20, branch_channels: int = 8,
                     dropout_rate: float = 0.3) -> ClassifierModel:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ClassifierModel(ohlcv_channels, price_channels, non_price_channels,
                           window, rng, hidden_size=hidden_size,
                           branch_channels=branch_channels, dropout_rate=dropout_rate)
