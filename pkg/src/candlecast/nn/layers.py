"""Differentiable layers over the autograd tensor: 1-d convolution with the
standard output-length law, max pooling with first-argmax gradient routing,
nearest-neighbour upsampling, a gated recurrent (LSTM) cell, dense layers,
and inverted-scaling dropout.

Canonical activation layout is (batch, channels, length); a single instance
may be passed as (channels, length) and comes back unbatched, and the
dataset's (batch, channels, 1, length) blocks are accepted with the height
axis squeezed and restored.  Layer entry points reject NaN/Inf inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .tensor import (Tensor, as_tensor, concat, matmul, parameter, relu,
                     sigmoid, softmax, tanh, _node)

__all__ = ["ConvSpec", "Conv1d", "conv1d_out_len", "conv1d_forward", "maxpool1d",
           "upsample_nearest", "LstmCell", "lstm_step", "lstm_many_to_one",
           "Dense", "dense", "dropout", "relu", "sigmoid", "tanh", "softmax"]


def check_finite(x: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise DataError(f"non-finite values entering {where}")
    return x


def _to_bcl(x: Tensor):
    """Normalize (C,L), (B,C,L), or (B,C,1,L) to (B,C,L); returns the tensor
    plus a restore tag for the output."""
    if x.ndim == 2:
        return x.reshape(1, *x.shape), "single"
    if x.ndim == 3:
        return x, "batch"
    if x.ndim == 4:
        if x.shape[2] != 1:
            raise DataError(f"4-d input must have height 1, got {x.shape}")
        return x.reshape(x.shape[0], x.shape[1], x.shape[3]), "height"
    raise DataError(f"expected 2-d, 3-d, or 4-d input, got shape {x.shape}")


def _restore(y: Tensor, tag: str) -> Tensor:
    if tag == "single":
        return y.reshape(*y.shape[1:])
    if tag == "height":
        return y.reshape(y.shape[0], y.shape[1], 1, y.shape[2])
    return y


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel_size: int = 3
    stride: int = 1
    padding: int = 0
    dilation: int = 1

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise DataError(f"channel counts must be >= 1, got {self}")
        if self.kernel_size < 1 or self.stride < 1 or self.dilation < 1 or self.padding < 0:
            raise DataError(f"bad geometry in {self}")


def conv1d_out_len(spec: ConvSpec, l_in: int) -> int:
    """floor((L_in + 2p - d(k-1) - 1) / s + 1); errors if nothing fits."""
    out = (l_in + 2 * spec.padding - spec.dilation * (spec.kernel_size - 1) - 1) // spec.stride + 1
    if out < 1:
        raise DataError(f"no output positions: L_in={l_in} with {spec}")
    return out


def same_padding(kernel_size: int) -> int:
    """Width-preserving padding for stride-1 odd kernels: (k-1)/2."""
    return (kernel_size - 1) // 2


def _window_index(spec: ConvSpec, l_out: int) -> np.ndarray:
    # (l_out, k) gather positions into the padded signal
    return (np.arange(l_out)[:, None] * spec.stride
            + np.arange(spec.kernel_size)[None, :] * spec.dilation)


def conv1d_forward(x, spec: ConvSpec, weight: Tensor, bias: Tensor) -> Tensor:
    """Cross-correlation along the last axis.

    weight is (out_channels, in_channels, kernel_size); bias is (out_channels,).
    """
    x = check_finite(as_tensor(x), "conv1d")
    x3, tag = _to_bcl(x)
    b, c, l = x3.shape
    if c != spec.in_channels:
        raise DataError(f"conv1d expects {spec.in_channels} channels, got {c} (input {x.shape})")
    if weight.shape != (spec.out_channels, spec.in_channels, spec.kernel_size):
        raise DataError(f"conv1d weight shape {weight.shape} does not match {spec}")
    if bias.shape != (spec.out_channels,):
        raise DataError(f"conv1d bias shape {bias.shape} does not match {spec}")
    l_out = conv1d_out_len(spec, l)
    idx = _window_index(spec, l_out)

    xd = x3.data
    if spec.padding:
        xd = np.pad(xd, ((0, 0), (0, 0), (spec.padding, spec.padding)))
    windows = xd[:, :, idx]                                   # (b, c, l_out, k)
    out_data = np.einsum("bclk,dck->bdl", windows, weight.data) \
        + bias.data[None, :, None]

    def backward(g):
        if weight.requires_grad:
            weight._accumulate(np.einsum("bclk,bdl->dck", windows, g))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if x3.requires_grad:
            gx = np.zeros((b, c, l + 2 * spec.padding))
            for k in range(spec.kernel_size):
                # tap k writes a strided, collision-free slice per output row
                sl = slice(k * spec.dilation, k * spec.dilation + spec.stride * l_out, spec.stride)
                gx[:, :, sl] += np.einsum("bdl,dc->bcl", g, weight.data[:, :, k])
            if spec.padding:
                gx = gx[:, :, spec.padding:-spec.padding]
            x3._accumulate(gx)

    out = _node(out_data, (x3, weight, bias), backward)
    return _restore(out, tag)


class Conv1d:
    """Conv layer owning its parameters; weights ~ N(0, 2/fan_in)."""

    def __init__(self, spec: ConvSpec, rng: np.random.Generator, name: str = "conv"):
        self.spec = spec
        fan_in = spec.in_channels * spec.kernel_size
        self.weight = parameter(
            rng.normal(0.0, np.sqrt(2.0 / fan_in),
                       (spec.out_channels, spec.in_channels, spec.kernel_size)),
            name=f"{name}.weight")
        self.bias = parameter(np.zeros(spec.out_channels), name=f"{name}.bias")

    def __call__(self, x) -> Tensor:
        return conv1d_forward(x, self.spec, self.weight, self.bias)

    def parameters(self) -> dict:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


def maxpool1d(x, kernel: int, stride: int | None = None) -> Tensor:
    """Windowed maximum along the last axis; gradient flows to the first
    maximum of each window (ties resolved to the lowest position)."""
    if kernel < 1:
        raise DataError(f"pool kernel must be >= 1, got {kernel}")
    stride = kernel if stride is None else stride
    if stride < 1:
        raise DataError(f"pool stride must be >= 1, got {stride}")
    x = check_finite(as_tensor(x), "maxpool1d")
    x3, tag = _to_bcl(x)
    b, c, l = x3.shape
    if kernel > l:
        raise DataError(f"pool kernel {kernel} exceeds length {l}")
    spec = ConvSpec(1, 1, kernel, stride)
    l_out = conv1d_out_len(spec, l)
    idx = _window_index(spec, l_out)
    windows = x3.data[:, :, idx]                              # (b, c, l_out, k)
    arg = windows.argmax(axis=3)                              # first max wins
    out_data = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
    src = idx[np.arange(l_out)[None, None, :], arg]           # (b, c, l_out) source positions

    def backward(g):
        gx = np.zeros((b, c, l))
        bi = np.arange(b)[:, None, None]
        ci = np.arange(c)[None, :, None]
        np.add.at(gx, (bi, ci, src), g)
        x3._accumulate(gx)

    out = _node(out_data, (x3,), backward)
    return _restore(out, tag)


def upsample_nearest(x, factor: int) -> Tensor:
    """Repeat each position ``factor`` times along the last axis; the
    backward pass sums the gradient over each repeat group."""
    if factor < 1:
        raise DataError(f"upsample factor must be >= 1, got {factor}")
    x = check_finite(as_tensor(x), "upsample_nearest")
    x3, tag = _to_bcl(x)
    b, c, l = x3.shape
    out_data = np.repeat(x3.data, factor, axis=2)

    def backward(g):
        x3._accumulate(g.reshape(b, c, l, factor).sum(axis=3))

    out = _node(out_data, (x3,), backward)
    return _restore(out, tag)


class LstmCell:
    """Gated recurrent cell: candidate, update, forget, and output gates over
    the concatenation [a_prev, x]; all four weight matrices are
    hidden x (hidden + input)."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator,
                 name: str = "lstm"):
        self.input_size = int(input_size)
        self.hidden_size = int(hidden_size)
        width = self.hidden_size + self.input_size
        scale = 1.0 / np.sqrt(width)
        self.params = {}
        for gate in ("c", "u", "f", "o"):
            w = parameter(rng.normal(0.0, scale, (self.hidden_size, width)),
                          name=f"{name}.W_{gate}")
            bias = parameter(np.zeros(self.hidden_size), name=f"{name}.b_{gate}")
            self.params[f"W_{gate}"] = w
            self.params[f"b_{gate}"] = bias

    def parameters(self) -> dict:
        return {p.name: p for p in self.params.values()}


def lstm_step(cell: LstmCell, a_prev, c_prev, x):
    """One recurrence step.

    Accepts (hidden,) / (input,) vectors or (batch, hidden) / (batch, input)
    blocks; returns (a, c) with matching arrangement.
      candidate  c~ = tanh(W_c [a_prev, x] + b_c)
      gates      u, f, o = sigmoid(W_g [a_prev, x] + b_g)
      state      c = u * c~ + f * c_prev,  a = o * tanh(c)
    """
    a_prev, c_prev, x = as_tensor(a_prev), as_tensor(c_prev), as_tensor(x)
    for t, label in ((a_prev, "a_prev"), (c_prev, "c_prev"), (x, "x")):
        check_finite(t, f"lstm_step {label}")
    single = x.ndim == 1
    if single:
        a_prev, c_prev, x = (t.reshape(1, -1) for t in (a_prev, c_prev, x))
    h, d = cell.hidden_size, cell.input_size
    if x.shape[1] != d or a_prev.shape[1] != h or c_prev.shape[1] != h:
        raise DataError(f"lstm_step dims: x {x.shape}, a_prev {a_prev.shape}, "
                        f"c_prev {c_prev.shape} vs hidden={h}, input={d}")
    z = concat([a_prev, x], axis=1)
    p = cell.params

    def gate(which, fn):
        return fn(matmul(z, transpose_2d(p[f"W_{which}"])) + p[f"b_{which}"])

    c_tilde = gate("c", tanh)
    g_u = gate("u", sigmoid)
    g_f = gate("f", sigmoid)
    g_o = gate("o", sigmoid)
    c = g_u * c_tilde + g_f * c_prev
    a = g_o * tanh(c)
    if single:
        a, c = a.reshape(h), c.reshape(h)
    return a, c


def transpose_2d(t: Tensor) -> Tensor:
    return t.transpose(1, 0)


def lstm_many_to_one(cell: LstmCell, sequence) -> Tensor:
    """Run the cell over a sequence from zero states and return the final
    hidden state.

    ``sequence`` is a list of per-step inputs, a (T, input) array, or a
    (batch, T, input) block; the result is (hidden,) or (batch, hidden).
    """
    if isinstance(sequence, Tensor) or isinstance(sequence, np.ndarray):
        seq = as_tensor(sequence)
        if seq.ndim == 2:
            steps = [seq[t] for t in range(seq.shape[0])]
        elif seq.ndim == 3:
            steps = [seq[:, t] for t in range(seq.shape[1])]
        else:
            raise DataError(f"sequence must be (T, input) or (batch, T, input), got {seq.shape}")
    else:
        steps = [as_tensor(s) for s in sequence]
    if not steps:
        raise DataError("empty sequence")
    single = steps[0].ndim == 1
    batch = 1 if single else steps[0].shape[0]
    a = Tensor(np.zeros((batch, cell.hidden_size)))
    c = Tensor(np.zeros((batch, cell.hidden_size)))
    for s in steps:
        if single:
            s = s.reshape(1, -1)
        a, c = lstm_step(cell, a, c, s)
    return a.reshape(cell.hidden_size) if single else a


class Dense:
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 name: str = "dense", zero_init: bool = False):
        if zero_init:
            w = np.zeros((out_features, in_features))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / in_features), (out_features, in_features))
        self.weight = parameter(w, name=f"{name}.weight")
        self.bias = parameter(np.zeros(out_features), name=f"{name}.bias")

    def __call__(self, x) -> Tensor:
        return dense(x, self.weight, self.bias)

    def parameters(self) -> dict:
        return {self.weight.name: self.weight, self.bias.name: self.bias}


def dense(x, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map x W^T + b; x is (features,) or (batch, features)."""
    x = check_finite(as_tensor(x), "dense")
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    if x.shape[1] != weight.shape[1]:
        raise DataError(f"dense expects {weight.shape[1]} features, got {x.shape[1]}")
    out = matmul(x, transpose_2d(weight)) + bias
    return out.reshape(weight.shape[0]) if single else out


def dropout(x, rate: float, rng: np.random.Generator | int, training: bool = True) -> Tensor:
    """Inverted-scaling dropout: each unit is zeroed with probability ``rate``
    and survivors scale by 1/(1-rate), so inference needs no rescaling."""
    if not 0.0 <= rate < 1.0:
        raise DataError(f"dropout rate must be in [0, 1), got {rate}")
    x = check_finite(as_tensor(x), "dropout")
    if not training or rate == 0.0:
        return x * 1.0
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)
