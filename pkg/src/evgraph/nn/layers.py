"""Parameterized layers built on the tensor kernel.

A ParameterStore owns every trainable array under a dotted name so that
optimizers, checkpoints, and parameter-group splits can address them
uniformly.  Layers are thin callables that close over their store entries.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "ParameterStore",
    "linear",
    "Linear",
    "SelfAttentionBlock",
    "pool_subwords",
    "sinusoidal_positions",
    "dropout_stream",
]


class ParameterStore:
    """Ordered registry of named parameters."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.ascontiguousarray(data, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        missing = [n for n in self._params if n not in arrays]
        extra = [n for n in arrays if n not in self._params]
        if missing or extra:
            raise KeyError(f"parameter name mismatch: missing={missing} extra={extra}")
        for name, t in self._params.items():
            a = np.ascontiguousarray(arrays[name], dtype=self.dtype)
            if a.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}: {a.shape} vs {t.data.shape}")
            t.data = a
            t.grad = None


def _xavier(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x W + b with backward through all three inputs."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ValueError(f"linear shape mismatch: x {x.data.shape} @ W {w.data.shape}")
    return T.add(T.matmul(x, w), b)


class Linear:
    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, init: str = "xavier"):
        if init == "zeros":
            w = np.zeros((d_in, d_out))
        else:
            w = _xavier(rng, d_in, d_out)
        self.w = store.add(name + ".w", w)
        self.b = store.add(name + ".b", np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.w, self.b)


_PE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def sinusoidal_positions(n_rows: int, d_model: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos position table, cached per (rows, width)."""
    key = (n_rows, d_model)
    pe = _PE_CACHE.get(key)
    if pe is None:
        pos = np.arange(n_rows, dtype=np.float64)[:, None]
        idx = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
        angles = pos / np.power(10000.0, idx / d_model)
        pe = np.zeros((n_rows, d_model), dtype=np.float64)
        pe[:, 0::2] = np.sin(angles)
        pe[:, 1::2] = np.cos(angles[:, : d_model // 2])
        _PE_CACHE[key] = pe
    return pe.astype(dtype, copy=False)


def dropout_stream(seed: int, step: int, slot: int, site: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, step, slot, site).

    Each dropout site draws from its own Philox stream, so masks do not
    depend on evaluation order and runs replay bit-exactly.
    """
    tag = f"{seed}|{step}|{slot}|{site}".encode()
    digest = hashlib.blake2b(tag, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class SelfAttentionBlock:
    """Pre-norm transformer encoder layer: MHSA + residual, GELU FFN + residual.

    When ``use_positional`` is passed at call time, the fixed sinusoidal
    table is added to the input first; left off, the layer is permutation
    equivariant. ``drop`` is a callable ``(tensor, site, rate) -> tensor``
    or None for inference.
    """

    def __init__(self, store: ParameterStore, prefix: str, d_model: int,
                 n_heads: int, rng: np.random.Generator):
        if d_model % n_heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by n_heads {n_heads}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.prefix = prefix
        self.ln1_g = store.add(prefix + ".ln1.gamma", np.ones(d_model))
        self.ln1_b = store.add(prefix + ".ln1.beta", np.zeros(d_model))
        self.wq = Linear(store, prefix + ".attn.q", d_model, d_model, rng)
        self.wk = Linear(store, prefix + ".attn.k", d_model, d_model, rng)
        self.wv = Linear(store, prefix + ".attn.v", d_model, d_model, rng)
        self.wo = Linear(store, prefix + ".attn.o", d_model, d_model, rng)
        self.ln2_g = store.add(prefix + ".ln2.gamma", np.ones(d_model))
        self.ln2_b = store.add(prefix + ".ln2.beta", np.zeros(d_model))
        self.ff1 = Linear(store, prefix + ".ff.in", d_model, 4 * d_model, rng)
        self.ff2 = Linear(store, prefix + ".ff.out", 4 * d_model, d_model, rng)

    def __call__(self, x: Tensor, use_positional: bool = False, drop=None) -> Tensor:
        if use_positional:
            x = T.add_const(x, sinusoidal_positions(x.data.shape[0], self.d_model,
                                                    x.data.dtype))
        dh = self.d_model // self.n_heads
        h = T.layer_norm(x, self.ln1_g, self.ln1_b)
        q = T.split_heads(self.wq(h), self.n_heads)
        k = T.split_heads(self.wk(h), self.n_heads)
        v = T.split_heads(self.wv(h), self.n_heads)
        att = T.softmax_last(T.scale(T.matmul_t(q, k), 1.0 / np.sqrt(dh)))
        if drop is not None:
            att = drop(att, self.prefix + ".attn_probs")
        ctx = self.wo(T.merge_heads(T.matmul(att, v)))
        if drop is not None:
            ctx = drop(ctx, self.prefix + ".attn_out")
        x = T.add(x, ctx)
        h2 = T.layer_norm(x, self.ln2_g, self.ln2_b)
        f = self.ff2(T.gelu(self.ff1(h2)))
        if drop is not None:
            f = drop(f, self.prefix + ".ffn_out")
        return T.add(x, f)


def pool_subwords(pieces: Tensor, score_w: Tensor, score_b: Tensor,
                  mask: np.ndarray | None = None) -> Tensor:
    """Attention-pool subword vectors into token vectors.

    ``pieces`` is (S, d) for one token, returning (d,), or (T, P, d) for a
    padded batch with boolean ``mask`` (T, P), returning (T, d).  Scores are
    a learned linear map to one logit per subword, softmaxed per token.
    """
    if pieces.data.ndim == 2:
        s, d = pieces.data.shape
        if s == 0:
            raise ValueError("pool_subwords requires at least one subword vector")
        scores = T.reshape(linear(pieces, score_w, score_b), (s,))
        probs = T.reshape(T.softmax_last(scores), (1, s))
        return T.reshape(T.matmul(probs, pieces), (d,))
    t, p, d = pieces.data.shape
    scores = T.reshape(linear(pieces, score_w, score_b), (t, p))
    if mask is not None:
        if not mask.any(axis=1).all():
            raise ValueError("pool_subwords: every token needs at least one subword")
        neg = np.where(mask, 0.0, -1e9).astype(pieces.data.dtype)
        scores = T.add_const(scores, neg)
    probs = T.reshape(T.softmax_last(scores), (t, 1, p))
    return T.reshape(T.matmul(probs, pieces), (t, d))
