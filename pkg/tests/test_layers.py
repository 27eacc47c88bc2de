"""Parameter registry, attention blocks, subword pooling, positional tables."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from evgraph.nn import (
    Linear,
    ParameterStore,
    SelfAttentionBlock,
    Tensor,
    dropout_stream,
    linear,
    pool_subwords,
    sinusoidal_positions,
)
from evgraph.nn import tensor as T


def f64_store():
    return ParameterStore(dtype=np.float64)


class TestParameterStore:
    def test_add_and_lookup(self):
        st = f64_store()
        t = st.add("a.w", np.ones((2, 3)))
        assert st["a.w"] is t
        assert "a.w" in st and "a.b" not in st
        assert st.n_params() == 6

    def test_duplicate_name_rejected(self):
        st = f64_store()
        st.add("a", np.ones(1))
        with pytest.raises(ValueError, match="duplicate parameter"):
            st.add("a", np.ones(1))

    def test_order_preserved(self):
        st = f64_store()
        for name in ("z", "a", "m"):
            st.add(name, np.zeros(1))
        assert st.names() == ["z", "a", "m"]

    def test_zero_grads(self):
        st = f64_store()
        t = st.add("a", np.ones(2))
        t.grad = np.ones(2)
        st.zero_grads()
        assert t.grad is None

    def test_load_state_roundtrip(self):
        st = f64_store()
        st.add("a", np.ones((2, 2)))
        st.load_state({"a": np.full((2, 2), 7.0)})
        assert_allclose(st["a"].data, np.full((2, 2), 7.0))

    def test_load_state_name_mismatch(self):
        st = f64_store()
        st.add("a", np.ones(1))
        with pytest.raises(KeyError, match="missing"):
            st.load_state({})
        with pytest.raises(KeyError, match="extra"):
            st.load_state({"a": np.ones(1), "b": np.ones(1)})

    def test_load_state_shape_mismatch(self):
        st = f64_store()
        st.add("a", np.ones((2, 2)))
        with pytest.raises(ValueError, match="shape mismatch"):
            st.load_state({"a": np.ones(3)})

    def test_dtype_coercion(self):
        st = ParameterStore(dtype=np.float32)
        t = st.add("a", np.ones(2, dtype=np.float64))
        assert t.data.dtype == np.float32


class TestLinear:
    def test_forward_value(self):
        x = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        w = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]), requires_grad=True)
        b = Tensor(np.array([1.0, 3.0]), requires_grad=True)
        assert_allclose(linear(x, w, b).data, [[2.0, 5.0]])

    def test_shape_mismatch(self):
        x = Tensor(np.ones((1, 3)))
        w = Tensor(np.ones((2, 2)))
        with pytest.raises(ValueError, match="linear shape"):
            linear(x, w, Tensor(np.zeros(2)))

    def test_zeros_init(self):
        st = f64_store()
        lin = Linear(st, "head", 4, 3, np.random.default_rng(0), init="zeros")
        out = lin(Tensor(np.random.default_rng(1).standard_normal((5, 4))))
        assert_allclose(out.data, np.zeros((5, 3)))

    def test_xavier_bounds(self):
        st = f64_store()
        Linear(st, "l", 10, 10, np.random.default_rng(0))
        limit = np.sqrt(6.0 / 20)
        w = st["l.w"].data
        assert (np.abs(w) <= limit).all() and np.abs(w).max() > 0.5 * limit


class TestSinusoidalPositions:
    def test_closed_form(self):
        pe = sinusoidal_positions(4, 6, dtype=np.float64)
        assert_allclose(pe[0], [0, 1, 0, 1, 0, 1], atol=1e-15)
        assert_allclose(pe[2, 0], np.sin(2.0), rtol=1e-12)
        assert_allclose(pe[2, 1], np.cos(2.0), rtol=1e-12)
        assert_allclose(pe[1, 2], np.sin(1.0 / 10000.0 ** (2 / 6)), rtol=1e-12)
        assert_allclose(pe[1, 3], np.cos(1.0 / 10000.0 ** (2 / 6)), rtol=1e-12)

    def test_rows_distinct(self):
        pe = sinusoidal_positions(50, 16)
        assert len({tuple(np.round(r, 6)) for r in pe}) == 50

    def test_bounded(self):
        pe = sinusoidal_positions(100, 32)
        assert np.abs(pe).max() <= 1.0 + 1e-6


class TestDropoutStream:
    def test_replayable(self):
        a = dropout_stream(1, 2, 3, "enc.attn_probs").random(8)
        b = dropout_stream(1, 2, 3, "enc.attn_probs").random(8)
        assert_allclose(a, b)

    def test_key_sensitivity(self):
        base = dropout_stream(1, 2, 3, "s").random(4)
        for other in (dropout_stream(9, 2, 3, "s"), dropout_stream(1, 9, 3, "s"),
                      dropout_stream(1, 2, 9, "s"), dropout_stream(1, 2, 3, "t")):
            assert not np.allclose(base, other.random(4))


class TestSelfAttentionBlock:
    def make(self, d_model=8, n_heads=2, seed=0):
        st = f64_store()
        block = SelfAttentionBlock(st, "blk", d_model, n_heads,
                                   np.random.default_rng(seed))
        return st, block

    def test_rejects_bad_head_split(self):
        with pytest.raises(ValueError, match="divisible"):
            SelfAttentionBlock(f64_store(), "b", 10, 3, np.random.default_rng(0))

    def test_residual_identity_with_zero_outputs(self):
        st, block = self.make()
        st["blk.attn.o.w"].data[:] = 0.0
        st["blk.ff.out.w"].data[:] = 0.0
        x = np.random.default_rng(1).standard_normal((5, 8))
        out = block(Tensor(x))
        assert_allclose(out.data, x, atol=1e-12)

    def test_permutation_equivariance(self):
        st, block = self.make()
        rng = np.random.default_rng(2)
        x = rng.standard_normal((7, 8))
        perm = rng.permutation(7)
        out = block(Tensor(x)).data
        out_perm = block(Tensor(x[perm])).data
        assert_allclose(out_perm, out[perm], atol=1e-10)

    def test_positional_breaks_equivariance(self):
        st, block = self.make()
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 8))
        perm = np.roll(np.arange(6), 1)
        out = block(Tensor(x), use_positional=True).data
        out_perm = block(Tensor(x[perm]), use_positional=True).data
        assert np.abs(out_perm - out[perm]).max() > 1e-3

    def test_param_names(self):
        st, _ = self.make()
        expect = {
            "blk.ln1.gamma", "blk.ln1.beta", "blk.ln2.gamma", "blk.ln2.beta",
            "blk.attn.q.w", "blk.attn.q.b", "blk.attn.k.w", "blk.attn.k.b",
            "blk.attn.v.w", "blk.attn.v.b", "blk.attn.o.w", "blk.attn.o.b",
            "blk.ff.in.w", "blk.ff.in.b", "blk.ff.out.w", "blk.ff.out.b",
        }
        assert set(st.names()) == expect

    def test_drop_sites_invoked(self):
        _, block = self.make()
        seen = []

        def drop(t, site):
            seen.append(site)
            return t

        block(Tensor(np.zeros((3, 8))), drop=drop)
        assert seen == ["blk.attn_probs", "blk.attn_out", "blk.ffn_out"]

    def test_gradients_flow_to_all_params(self):
        st, block = self.make()
        x = Tensor(np.random.default_rng(4).standard_normal((4, 8)),
                   requires_grad=True)
        T.backward(T.sum_all(block(x)))
        for name, p in st.items():
            assert p.grad is not None, name
        assert x.grad is not None


class TestPoolSubwords:
    def weights(self, d, seed=0):
        rng = np.random.default_rng(seed)
        return (Tensor(rng.standard_normal((d, 1)), requires_grad=True),
                Tensor(np.zeros(1), requires_grad=True))

    def test_single_subword_identity(self):
        w, b = self.weights(4)
        x = np.random.default_rng(1).standard_normal((1, 4))
        assert_allclose(pool_subwords(Tensor(x), w, b).data, x[0], atol=1e-12)

    def test_identical_subwords_identity(self):
        w, b = self.weights(4)
        row = np.random.default_rng(2).standard_normal(4)
        x = np.tile(row, (3, 1))
        assert_allclose(pool_subwords(Tensor(x), w, b).data, row, atol=1e-12)

    def test_zero_scores_exact_mean(self):
        d = 5
        w = Tensor(np.zeros((d, 1)), requires_grad=True)
        b = Tensor(np.zeros(1), requires_grad=True)
        x = np.random.default_rng(3).standard_normal((4, d))
        assert_allclose(pool_subwords(Tensor(x), w, b).data, x.mean(axis=0),
                        atol=1e-12)

    def test_batched_matches_single(self):
        d = 6
        w, b = self.weights(d, seed=4)
        rng = np.random.default_rng(5)
        lengths = [1, 3, 2]
        per_token = [rng.standard_normal((n, d)) for n in lengths]
        p_max = max(lengths)
        batch = np.zeros((3, p_max, d))
        mask = np.zeros((3, p_max), dtype=bool)
        for i, block in enumerate(per_token):
            batch[i, : len(block)] = block
            mask[i, : len(block)] = True
        batched = pool_subwords(Tensor(batch), w, b, mask=mask).data
        for i, block in enumerate(per_token):
            single = pool_subwords(Tensor(block), w, b).data
            assert_allclose(batched[i], single, atol=1e-10)

    def test_empty_inputs_rejected(self):
        w, b = self.weights(3)
        with pytest.raises(ValueError, match="at least one subword"):
            pool_subwords(Tensor(np.zeros((0, 3))), w, b)
        with pytest.raises(ValueError, match="at least one subword"):
            pool_subwords(Tensor(np.zeros((2, 2, 3))), w, b,
                          mask=np.array([[True, False], [False, False]]))

    def test_padding_rows_have_no_influence(self):
        d = 4
        w, b = self.weights(d, seed=6)
        batch = np.zeros((1, 3, d))
        batch[0, 0] = 1.0
        mask = np.array([[True, False, False]])
        poisoned = batch.copy()
        poisoned[0, 1:] = 1e6
        a = pool_subwords(Tensor(batch), w, b, mask=mask).data
        c = pool_subwords(Tensor(poisoned), w, b, mask=mask).data
        assert_allclose(a, c, atol=1e-9)
