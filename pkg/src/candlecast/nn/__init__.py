"""Tensor autograd core, layers, losses, optimizer, and checkpoints."""
from __future__ import annotations

from .tensor import (Tensor, as_tensor, clamp, concat, parameter, relu,
                     sigmoid, softmax, tanh)
from .layers import (Conv1d, ConvSpec, Dense, LstmCell, conv1d_forward,
                     conv1d_out_len, dense, dropout, lstm_many_to_one,
                     lstm_step, maxpool1d, same_padding, upsample_nearest)
from .losses import bce_loss, mse_loss
from .optim import Adam, adam_step
from .checkpoint import load_checkpoint, restore_parameters, save_checkpoint

__all__ = [
    "Tensor", "as_tensor", "clamp", "concat", "parameter", "relu", "sigmoid",
    "softmax", "tanh", "Conv1d", "ConvSpec", "Dense", "LstmCell",
    "conv1d_forward", "conv1d_out_len", "dense", "dropout", "lstm_many_to_one",
    "lstm_step", "maxpool1d", "same_padding", "upsample_nearest", "bce_loss",
    "mse_loss", "Adam", "adam_step", "load_checkpoint", "restore_parameters",
    "save_checkpoint",
]
