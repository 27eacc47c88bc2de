"""Reverse-mode automatic differentiation over dense numpy arrays.

Only the operations the parser needs are provided.  Each op records a
backward closure on the output tensor; ``backward`` walks the recorded
graph in reverse topological order and accumulates gradients into the
``grad`` buffers of tensors that require them.  Compute runs in the dtype
of the inputs: float32 for training, float64 for finite-difference
gradient checking.  Inside ``no_grad()`` no graph is recorded.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "no_grad",
    "backward",
    "add",
    "add_const",
    "mul",
    "scale",
    "matmul",
    "matmul_t",
    "reshape",
    "split_heads",
    "merge_heads",
    "concat_rows",
    "slice_rows",
    "gather_rows",
    "gather_pairs",
    "softmax_last",
    "layer_norm",
    "gelu",
    "dropout",
    "sum_all",
    "mean_all",
    "bce_with_logits",
    "softmax_ce",
    "biaffine",
    "np_sigmoid",
]

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class _GradMode(threading.local):
    def __init__(self):
        self.enabled = True


_mode = _GradMode()


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        self._prev = _mode.enabled
        _mode.enabled = False
        return self

    def __exit__(self, *exc):
        _mode.enabled = self._prev
        return False


class Tensor:
    """A dense array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev: tuple = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _track(out_data, inputs, backward_fn) -> Tensor:
    """Wrap op output; record the closure only when tracing is active."""
    if _mode.enabled and any(t.requires_grad for t in inputs):
        out = Tensor(out_data, requires_grad=True)
        out._backward = backward_fn
        out._prev = tuple(t for t in inputs if t.requires_grad)
        return out
    return Tensor(out_data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _grad_buf(t: Tensor) -> np.ndarray:
    """Gradient buffer for in-place scatter accumulation."""
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def backward(root: Tensor, grad=None) -> None:
    """Backpropagate from ``root``; ``grad`` seeds the output gradient."""
    if grad is None:
        seed = np.ones_like(root.data)
    else:
        seed = np.asarray(grad, dtype=root.data.dtype)
        if seed.shape != root.data.shape:
            seed = np.broadcast_to(seed, root.data.shape).copy()
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, post = stack.pop()
        if post:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if id(p) not in seen:
                stack.append((p, False))
    _accum(root, seed)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Elementwise / shape ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _track(out, (a, b), bwd)


def add_const(a: Tensor, c: np.ndarray) -> Tensor:
    out = a.data + c

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))

    return _track(out, (a,), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _track(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * a.data.dtype.type(c)

    def bwd(g):
        _accum(a, g * a.data.dtype.type(c))

    return _track(out, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D or batched 3-D matrix product (either side may broadcast)."""
    out = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _track(out, (a, b), bwd)


def matmul_t(a: Tensor, b: Tensor) -> Tensor:
    """a @ b.T over the last two axes (2-D or batched 3-D)."""
    out = a.data @ np.swapaxes(b.data, -1, -2)

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.swapaxes(g, -1, -2) @ a.data, b.data.shape))

    return _track(out, (a, b), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))

    return _track(out, (a,), bwd)


def split_heads(a: Tensor, n_heads: int) -> Tensor:
    """(rows, d) -> (n_heads, rows, d // n_heads)."""
    rows, d = a.data.shape
    out = np.ascontiguousarray(a.data.reshape(rows, n_heads, d // n_heads).swapaxes(0, 1))

    def bwd(g):
        _accum(a, g.swapaxes(0, 1).reshape(rows, d))

    return _track(out, (a,), bwd)


def merge_heads(a: Tensor) -> Tensor:
    """(n_heads, rows, dh) -> (rows, n_heads * dh)."""
    h, rows, dh = a.data.shape
    out = np.ascontiguousarray(a.data.swapaxes(0, 1)).reshape(rows, h * dh)

    def bwd(g):
        _accum(a, np.ascontiguousarray(g.reshape(rows, h, dh).swapaxes(0, 1)))

    return _track(out, (a,), bwd)


def concat_rows(tensors: list[Tensor]) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.data.shape[0] for t in tensors]

    def bwd(g):
        offset = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                _accum(t, g[offset : offset + n])
            offset += n

    return _track(out, tuple(tensors), bwd)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = a.data[start:stop]

    def bwd(g):
        buf = _grad_buf(a)
        buf[start:stop] += g

    return _track(out, (a,), bwd)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    out = a.data[idx]

    def bwd(g):
        np.add.at(_grad_buf(a), idx, g)

    return _track(out, (a,), bwd)


def gather_pairs(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Select entries (rows[i], cols[i], ...) from a 2-D or 3-D tensor."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out = a.data[rows, cols]

    def bwd(g):
        np.add.at(_grad_buf(a), (rows, cols), g)

    return _track(out, (a,), bwd)


# ---------------------------------------------------------------------------
# Nonlinearities and normalization
# ---------------------------------------------------------------------------


def softmax_last(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        _accum(a, (g - (g * s).sum(axis=-1, keepdims=True)) * s)

    return _track(s, (a,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gamma.data * xhat + beta.data

    def bwd(g):
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            _accum(beta, g.reshape(-1, g.shape[-1]).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gamma.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accum(x, inv * term)

    return _track(out, (x, gamma, beta), bwd)


def gelu(x: Tensor) -> Tensor:
    phi = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = x.data * phi

    def bwd(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
        _accum(x, g * (phi + x.data * pdf))

    return _track(out, (x,), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; the caller supplies the (counter-keyed) generator."""
    if rate <= 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    keep /= x.data.dtype.type(1.0 - rate)
    out = x.data * keep

    def bwd(g):
        _accum(x, g * keep)

    return _track(out, (x,), bwd)


# ---------------------------------------------------------------------------
# Reductions and losses
# ---------------------------------------------------------------------------


def sum_all(a: Tensor) -> Tensor:
    out = a.data.sum()

    def bwd(g):
        _accum(a, np.full_like(a.data, g))

    return _track(out, (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    out = a.data.mean()

    def bwd(g):
        _accum(a, np.full_like(a.data, g / a.data.size))

    return _track(out, (a,), bwd)


def np_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: Tensor, targets: np.ndarray,
                    mask: np.ndarray | None = None) -> Tensor:
    """Mean binary cross-entropy from logits over unmasked entries.

    An empty mask yields a constant zero loss.
    """
    z = logits.data
    y = np.asarray(targets, dtype=z.dtype)
    elem = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        n = int(m.sum())
        if n == 0:
            return Tensor(z.dtype.type(0.0))
        out = elem[m].sum() / n
    else:
        m = None
        n = z.size
        out = elem.mean()

    def bwd(g):
        d = (np_sigmoid(z) - y).astype(z.dtype)
        if m is not None:
            d = np.where(m, d, 0.0)
        _accum(logits, d * (g / n))

    return _track(out, (logits,), bwd)


def softmax_ce(logits: Tensor, target_idx: np.ndarray) -> Tensor:
    """Mean cross-entropy of row-wise softmax against integer targets."""
    z = logits.data
    t = np.atleast_1d(np.asarray(target_idx, dtype=np.intp))
    z2 = z.reshape(-1, z.shape[-1])
    zmax = z2.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z2 - zmax).sum(axis=-1)) + zmax[:, 0]
    rows = np.arange(z2.shape[0])
    out = (lse - z2[rows, t]).mean()

    def bwd(g):
        p = np.exp(z2 - zmax)
        p /= p.sum(axis=-1, keepdims=True)
        p[rows, t] -= 1.0
        _accum(logits, (p * (g / z2.shape[0])).reshape(z.shape).astype(z.dtype))

    return _track(out, (logits,), bwd)


# ---------------------------------------------------------------------------
# Biaffine scoring
# ---------------------------------------------------------------------------


def biaffine(x: Tensor, y: Tensor, u: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Bilinear-plus-linear pair scoring.

    score[i, j, c] = x_i^T U[:, c, :] y_j + W[:, c]^T [x_i; y_j] + b[c]
    with x: (n, d1), y: (m, d2), U: (d1, k, d2), W: (d1 + d2, k), b: (k,).
    """
    n, d1 = x.data.shape
    m, d2 = y.data.shape
    du, k, de = u.data.shape
    if du != d1 or de != d2 or w.data.shape != (d1 + d2, k) or b.data.shape != (k,):
        raise ValueError(
            f"biaffine shape mismatch: x {x.data.shape}, y {y.data.shape}, "
            f"U {u.data.shape}, W {w.data.shape}, b {b.data.shape}"
        )
    xu = (x.data @ u.data.reshape(d1, k * d2)).reshape(n, k, d2)
    bil = (xu.reshape(n * k, d2) @ y.data.T).reshape(n, k, m).transpose(0, 2, 1)
    lin_x = x.data @ w.data[:d1]
    lin_y = y.data @ w.data[d1:]
    out = bil + lin_x[:, None, :] + lin_y[None, :, :] + b.data

    def bwd(g):
        g_linx = g.sum(axis=1)
        g_liny = g.sum(axis=0)
        # gy_mat[n, k, e] = sum_m g[n, m, k] y[m, e]
        gy_mat = (g.transpose(0, 2, 1).reshape(n * k, m) @ y.data).reshape(n, k, d2)
        if b.requires_grad:
            _accum(b, g.sum(axis=(0, 1)))
        if w.requires_grad:
            _accum(w, np.concatenate([x.data.T @ g_linx, y.data.T @ g_liny], axis=0))
        if u.requires_grad:
            _accum(u, (x.data.T @ gy_mat.reshape(n, k * d2)).reshape(d1, k, d2))
        if x.requires_grad:
            gx = gy_mat.reshape(n, k * d2) @ u.data.reshape(d1, k * d2).T
            _accum(x, gx + g_linx @ w.data[:d1].T)
        if y.requires_grad:
            gy = g.transpose(1, 0, 2).reshape(m, n * k) @ xu.reshape(n * k, d2)
            _accum(y, gy + g_liny @ w.data[d1:].T)

    return _track(out, (x, y, u, w, b), bwd)
