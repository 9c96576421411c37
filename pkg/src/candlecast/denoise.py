"""Wavelet denoising of feature columns.

Pipeline per column: multi-level discrete wavelet transform, soft
thresholding of the detail coefficients at the universal threshold
sigma_hat * sqrt(2 ln n), inverse transform.  sigma_hat is the robust
noise estimate median(|finest details|) / 0.6745.

Boundary handling is periodized (wrap-around), which keeps the transform
orthonormal: perfect reconstruction to machine precision and Parseval
energy accounting, so thresholding can only shrink the signal energy.
An odd-length level is first extended by repeating its last sample; the
inverse drops that sample again, so reconstruction stays exact.

Two modes:
  - ``global``  one transform over the whole column.  Smoothest output,
    but value at row t depends on rows after t (look-ahead), so it is
    only safe for fitting, never for trade simulation.
  - ``causal``  row t is the last sample of the denoised prefix [0..t].
    Strictly no look-ahead; levels are clamped to what the prefix allows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .indicators import FeatureClass, FeatureTable

_SQRT2 = math.sqrt(2.0)
_S3 = math.sqrt(3.0)

# orthonormal low-pass filters; high-pass is the quadrature mirror
_FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db4": np.array([1.0 + _S3, 3.0 + _S3, 3.0 - _S3, 1.0 - _S3]) / (4.0 * _SQRT2),
}

FAMILIES = ("haar", "db4")
MODES = ("global", "causal")

_ALIASES = {"haar": "haar", "db4": "db4", "daubechies4": "db4", "daubechies-4": "db4"}


@dataclass(frozen=True)
class WaveletConfig:
    family: str = "db4"
    levels: int = 2
    mode: str = "causal"

    def __post_init__(self):
        fam = _ALIASES.get(self.family.lower())
        if fam is None:
            raise ConfigError(f"unknown wavelet family {self.family!r}; use one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; use one of {MODES}")
        if int(self.levels) < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))

    def validate_length(self, n: int) -> None:
        if n < 2:
            raise DataError(f"need at least 2 samples, got {n}")
        if self.levels > int(math.log2(n)):
            raise ConfigError(f"levels={self.levels} too deep for {n} samples "
                              f"(max {int(math.log2(n))})")


def _qmf(h: np.ndarray) -> np.ndarray:
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    """One periodized level.  x is (m, k); returns (approx, detail), each
    (ceil(m/2), k).  Odd m is edge-padded by one sample first."""
    m = x.shape[0]
    if m % 2:
        x = np.concatenate([x, x[-1:]], axis=0)
        m += 1
    idx = (2 * np.arange(m // 2)[:, None] + np.arange(len(h))[None, :]) % m
    win = x[idx]  # (m/2, taps, k)
    a = np.einsum("wtk,t->wk", win, h)
    d = np.einsum("wtk,t->wk", win, g)
    return a, d


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray,
                    out_len: int) -> np.ndarray:
    """Adjoint of :func:`_analysis_step`, truncated back to ``out_len``."""
    half = a.shape[0]
    m = 2 * half
    y = np.zeros((m, a.shape[1]))
    base = 2 * np.arange(half)
    # rows 2k+j never collide for fixed j, so plain fancy-index adds suffice
    for j in range(len(h)):
        y[(base + j) % m] += a * h[j] + d * g[j]
    return y[:out_len]


def dwt_forward(x: np.ndarray, config: WaveletConfig):
    """Multi-level transform.  Returns ``(approx, details, lengths)`` where
    ``details[0]`` is the finest level and ``lengths[i]`` is the input length
    of level ``i`` (needed to undo odd-length padding)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    config.validate_length(x.shape[0])
    h = _FILTERS[config.family]
    g = _qmf(h)
    details, lengths = [], []
    cur = x
    for _ in range(config.levels):
        lengths.append(cur.shape[0])
        cur, d = _analysis_step(cur, h, g)
        details.append(d)
    if squeeze:
        return cur[:, 0], [d[:, 0] for d in details], lengths
    return cur, details, lengths


def dwt_inverse(approx: np.ndarray, details, lengths, config: WaveletConfig) -> np.ndarray:
    approx = np.asarray(approx, dtype=np.float64)
    squeeze = approx.ndim == 1
    if squeeze:
        approx = approx[:, None]
        details = [d[:, None] for d in details]
    h = _FILTERS[config.family]
    g = _qmf(h)
    cur = approx
    for d, out_len in zip(reversed(details), reversed(lengths)):
        cur = _synthesis_step(cur, np.asarray(d, dtype=np.float64), h, g, out_len)
    return cur[:, 0] if squeeze else cur


def _soft(c: np.ndarray, lam) -> np.ndarray:
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)


def _denoise_matrix(x: np.ndarray, config: WaveletConfig, levels: int) -> np.ndarray:
    """Global denoise of an (n, k) matrix with an explicit level count."""
    cfg = WaveletConfig(config.family, levels, "global")
    approx, details, lengths = dwt_forward(x, cfg)
    finest = details[0]
    sigma = np.median(np.abs(finest), axis=0) / 0.6745
    lam = sigma * math.sqrt(2.0 * math.log(x.shape[0]))
    details = [_soft(d, lam[None, :]) for d in details]
    return dwt_inverse(approx, details, lengths, cfg)


def denoise_column(x: np.ndarray, config: WaveletConfig) -> np.ndarray:
    """Denoise one column; output has the input's length.

    ``global`` mode transforms the whole column at once.  ``causal`` mode
    rebuilds row t from the prefix [0..t] only, clamping the level count to
    floor(log2(t+1)) for short prefixes and passing row 0 through untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError(f"expected a 1-d column, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite values in column")
    if config.mode == "global":
        config.validate_length(len(x))
        return _denoise_matrix(x[:, None], config, config.levels)[:, 0]
    # causal mode clamps the depth per prefix, so any length >= 1 is fine
    if len(x) == 0:
        raise DataError("empty column")
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, len(x)):
        m = t + 1
        levels = min(config.levels, int(math.log2(m)))
        out[t] = _denoise_matrix(x[:m, None], config, levels)[-1, 0]
    return out


def denoise_features(table: FeatureTable, config: WaveletConfig,
                     columns=None) -> FeatureTable:
    """Denoise selected columns of a feature table (default: every column
    except raw volume) and return a new table.

    The raw ``close`` column is denoised like the rest; callers that need
    untouched closes for labeling or trade accounting must take them from
    the original table.
    """
    if columns is None:
        columns = [n for n in table.names if n != "volume"]
    missing = [c for c in columns if c not in table.names]
    if missing:
        raise DataError(f"unknown columns {missing!r}")
    out = table.copy()
    cols = [table.names.index(c) for c in columns]
    x = table.values[:, cols]
    if config.mode == "global":
        config.validate_length(x.shape[0])
        y = _denoise_matrix(x, config, config.levels)
    else:
        y = np.empty_like(x)
        y[0] = x[0]
        for t in range(1, x.shape[0]):
            m = t + 1
            levels = min(config.levels, int(math.log2(m)))
            y[t] = _denoise_matrix(x[:m], config, levels)[-1]
    out.values[:, cols] = y
    return out
