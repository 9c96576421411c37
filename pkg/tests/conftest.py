"""Shared helpers: series builders and the finite-difference gradient oracle."""
from __future__ import annotations

import numpy as np

from candlecast.market_data import CandleSeries


def numeric_gradient(build, tensor, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the scalar ``build()`` w.r.t. one tensor,
    perturbing its ``data`` in place one element at a time."""
    numeric = np.zeros_like(tensor.data)
    flat = tensor.data.ravel()
    out = numeric.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        fp = float(build().data)
        flat[i] = keep - h
        fm = float(build().data)
        flat[i] = keep
        out[i] = (fp - fm) / (2.0 * h)
    return numeric


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def gradcheck(build, tensors, h: float = 1e-5) -> float:
    """Worst relative disagreement between backward() and finite differences
    over the given tensors.  ``build`` must rerun the full forward pass."""
    for t in tensors:
        t.grad = None
    build().backward()
    worst = 0.0
    for t in tensors:
        analytic = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        worst = max(worst, max_rel_err(analytic, numeric_gradient(build, t, h)))
    return worst


def make_series(n: int, seed: int, timeframe: int = 3600, base: float = 100.0) -> CandleSeries:
    """Random-walk series with wicks and lognormal volume, valid by construction."""
    rng = np.random.default_rng(seed)
    close = base * np.exp(np.cumsum(rng.normal(0.0, 0.01, n)))
    open_ = np.empty(n)
    open_[0] = close[0]
    open_[1:] = close[:-1]
    body_hi = np.maximum(open_, close)
    body_lo = np.minimum(open_, close)
    high = body_hi * (1.0 + rng.uniform(0.0, 0.004, n))
    low = body_lo * (1.0 - rng.uniform(0.0, 0.004, n))
    volume = rng.lognormal(1.0, 0.4, n)
    ts = np.arange(n, dtype=np.int64) * timeframe + 1_600_000_000
    return CandleSeries("TEST", timeframe, ts, open_, high, low, close, volume)


def series_from_closes(closes, timeframe: int = 3600, volume: float = 1.0) -> CandleSeries:
    """Series whose candles have the given closes and zero-length wicks."""
    close = np.asarray(closes, dtype=np.float64)
    n = len(close)
    open_ = np.empty(n)
    open_[0] = close[0]
    open_[1:] = close[:-1]
    high = np.maximum(open_, close)
    low = np.minimum(open_, close)
    ts = np.arange(n, dtype=np.int64) * timeframe + 1_600_000_000
    return CandleSeries("TEST", timeframe, ts, open_, high, low, close,
                        np.full(n, float(volume)))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion pass/fail lines after the run; the
    tests record them at call time but pytest captures their stdout."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERION_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
