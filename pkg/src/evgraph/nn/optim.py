"""AdamW with decoupled weight decay and the warmup-cosine schedule."""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor

__all__ = ["AdamW", "lr_at_step"]


def lr_at_step(step: int, warmup_steps: int, total_steps: int, peak_lr: float) -> float:
    """Linear warmup to ``peak_lr``, then cosine decay to zero.

    lr(warmup_steps) is exactly peak_lr; the two pieces agree at the
    boundary, so the schedule is continuous.
    """
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if not 0 <= warmup_steps < total_steps:
        raise ValueError(f"warmup_steps {warmup_steps} must lie in [0, {total_steps})")
    if warmup_steps > 0 and step < warmup_steps:
        return peak_lr * step / warmup_steps
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class AdamW:
    """Decoupled-weight-decay Adam over named parameter groups.

    Each group is a dict with keys ``name``, ``params`` (list of
    (param_name, Tensor)), ``peak_lr``, and ``weight_decay``.  ``step``
    takes the absolute learning rate per group for this update, so the
    caller's schedule is applied verbatim.
    """

    def __init__(self, groups: list[dict], beta1: float = 0.9,
                 beta2: float = 0.98, eps: float = 1e-8):
        self.groups = groups
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        for group in groups:
            for pname, p in group["params"]:
                self._m[pname] = np.zeros_like(p.data)
                self._v[pname] = np.zeros_like(p.data)

    def step(self, lrs: dict[str, float]) -> None:
        """Apply one update; ``lrs`` maps group name to learning rate."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for group in self.groups:
            lr = lrs[group["name"]]
            wd = group["weight_decay"]
            for pname, p in group["params"]:
                if p.grad is None:
                    raise ValueError(f"missing gradient for parameter {pname}")
                g = p.grad
                m = self._m[pname]
                v = self._v[pname]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * np.square(g)
                update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                if wd:
                    update = update + wd * p.data
                p.data -= p.data.dtype.type(lr) * update

    def zero_grad(self) -> None:
        for group in self.groups:
            for _, p in group["params"]:
                p.grad = None

    def param_tensors(self) -> list[tuple[str, Tensor]]:
        out = []
        for group in self.groups:
            out.extend(group["params"])
        return out
