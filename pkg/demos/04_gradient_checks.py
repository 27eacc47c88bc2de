"""
Checking the reverse-mode kernel against finite differences
===========================================================

Every differentiable operation ships with an analytic backward pass.
This script verifies a few of them the slow way: perturb each input
element by +-h, take the centered difference of the scalar output, and
compare against the autograd gradient.
"""

import numpy as np

from evgraph.nn import tensor as T
from evgraph.nn.tensor import Tensor, backward, no_grad

rng = np.random.default_rng(0)
h = 1e-5


def fd_check(name, fn, *arrays):
    """Max |analytic - numeric| over all inputs of scalar fn(*tensors)."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    backward(fn(*tensors))

    worst = 0.0
    for t, a in zip(tensors, arrays):
        numeric = np.zeros_like(a)
        flat, nflat = a.ravel(), numeric.ravel()
        for i in range(a.size):
            keep = flat[i]
            with no_grad():
                flat[i] = keep + h
                up = float(fn(*[Tensor(x) for x in arrays]).data)
                flat[i] = keep - h
                down = float(fn(*[Tensor(x) for x in arrays]).data)
            flat[i] = keep
            nflat[i] = (up - down) / (2 * h)
        worst = max(worst, float(np.abs(t.grad - numeric).max()))
    print(f"{name:>12}: max abs deviation {worst:.2e}")


# a plain matrix product
a = rng.standard_normal((3, 4))
b = rng.standard_normal((4, 2))
fd_check("matmul", lambda x, y: T.sum_all(T.matmul(x, y)), a, b)

# layer norm, whose backward couples every element of a row
x = rng.standard_normal((5, 6))
g = rng.standard_normal(6)
bias = rng.standard_normal(6)
fd_check("layer_norm",
         lambda t, gg, bb: T.sum_all(T.layer_norm(t, gg, bb)), x, g, bias)

# the biaffine scorer used by the anchor and edge heads
q = rng.standard_normal((3, 4))
k = rng.standard_normal((5, 4))
u = rng.standard_normal((4, 2, 4))
w = rng.standard_normal((8, 2))
c = rng.standard_normal(2)
fd_check("biaffine",
         lambda *ts: T.sum_all(T.biaffine(*ts)), q, k, u, w, c)

# masked binary cross-entropy, the workhorse loss
logits = rng.standard_normal((4, 7))
targets = (rng.random((4, 7)) > 0.5).astype(float)
fd_check("bce", lambda t: T.bce_with_logits(t, targets), logits)

print("all within finite-difference noise at h = 1e-5")
