"""Numerical substrate: autograd tensor ops, layers, optimizer, checkpoints."""

from . import tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    Linear,
    ParameterStore,
    SelfAttentionBlock,
    dropout_stream,
    linear,
    pool_subwords,
    sinusoidal_positions,
)
from .optim import AdamW, lr_at_step
from .tensor import Tensor, backward, no_grad

__all__ = [
    "tensor",
    "Tensor",
    "backward",
    "no_grad",
    "ParameterStore",
    "Linear",
    "SelfAttentionBlock",
    "linear",
    "pool_subwords",
    "sinusoidal_positions",
    "dropout_stream",
    "AdamW",
    "lr_at_step",
    "save_checkpoint",
    "load_checkpoint",
]
