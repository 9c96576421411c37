"""Scalar training losses on probability/regression outputs."""
from __future__ import annotations

import numpy as np

from ..errors import DataError
from .tensor import Tensor, as_tensor, clamp, log, mean

CLAMP_EPS = 1e-12


def bce_loss(y_hat, y) -> Tensor:
    """Binary cross-entropy with natural logs:
    -(1/m) sum(y ln p + (1-y) ln(1-p)), probabilities clamped to
    [1e-12, 1 - 1e-12] first."""
    y_hat = as_tensor(y_hat)
    y = np.asarray(y.data if isinstance(y, Tensor) else y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise DataError(f"prediction shape {y_hat.shape} != label shape {y.shape}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("labels must be 0 or 1")
    p = clamp(y_hat, CLAMP_EPS, 1.0 - CLAMP_EPS)
    yt = Tensor(y)
    return -mean(yt * log(p) + (1.0 - yt) * log(1.0 - p))


def mse_loss(y_hat, y) -> Tensor:
    """Mean squared error over all elements."""
    y_hat = as_tensor(y_hat)
    y = as_tensor(y)
    if y_hat.shape != y.shape:
        raise DataError(f"prediction shape {y_hat.shape} != target shape {y.shape}")
    diff = y_hat - y.detach()
    return mean(diff * diff)
