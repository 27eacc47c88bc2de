"""Text-to-event-graph parser.

The model encodes a sentence into contextual token vectors, expands each
token into a fixed number of latent queries, runs the queries through a
decoder stack without positional encoding, and scores three heads: node
presence per query, anchor alignment between queries and tokens, and
labeled edges over (virtual top + queries) x queries.  Training matches
queries to gold nodes with the Hungarian algorithm, so the objective does
not depend on gold node order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CapacityError, EmbeddingLookupError
from .graphs import EventGraph, EventMention, Sentence, Span, encode_graph
from .nn import tensor as T
from .nn.layers import (
    Linear,
    ParameterStore,
    SelfAttentionBlock,
    dropout_stream,
    linear,
    pool_subwords,
    sinusoidal_positions,
)
from .nn.tensor import Tensor, np_sigmoid

__all__ = [
    "ModelConfig",
    "ParseOutput",
    "EventParser",
    "solve_assignment",
    "match_targets",
    "training_loss",
]


@dataclass(frozen=True)
class ModelConfig:
    event_types: tuple[str, ...]
    roles: tuple[str, ...]
    d_model: int = 64
    n_queries_per_token: int = 2
    n_decoder_layers: int = 3
    n_encoder_layers: int = 2
    n_heads: int = 4
    hidden_size_anchor: int = 256
    hidden_size_edge_presence: int = 256
    hidden_size_edge_label: int = 256
    dropout_transformer: float = 0.25
    dropout_attention: float = 0.1
    encoder: str = "toy"
    external_dim: int | None = None
    n_hash_buckets: int = 4096
    threshold_presence: float = 0.5
    threshold_anchor: float = 0.5
    threshold_edge: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "event_types", tuple(self.event_types))
        object.__setattr__(self, "roles", tuple(self.roles))
        if not self.event_types or not self.roles:
            raise ValueError("label vocabularies must be non-empty")
        if len(set(self.event_types)) != len(self.event_types):
            raise ValueError("duplicate event types")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("duplicate roles")
        for name in ("d_model", "n_queries_per_token", "n_heads", "n_hash_buckets",
                     "hidden_size_anchor", "hidden_size_edge_presence",
                     "hidden_size_edge_label"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_decoder_layers < 0 or self.n_encoder_layers < 0:
            raise ValueError("layer counts must be >= 0")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.encoder not in ("toy", "external"):
            raise ValueError(f"unknown encoder kind: {self.encoder!r}")
        if self.encoder == "external" and not self.external_dim:
            raise ValueError("external encoder requires external_dim")

    @property
    def edge_labels(self) -> tuple[str, ...]:
        return self.event_types + self.roles

    def to_dict(self) -> dict:
        return {
            "event_types": list(self.event_types),
            "roles": list(self.roles),
            "d_model": self.d_model,
            "n_queries_per_token": self.n_queries_per_token,
            "n_decoder_layers": self.n_decoder_layers,
            "n_encoder_layers": self.n_encoder_layers,
            "n_heads": self.n_heads,
            "hidden_size_anchor": self.hidden_size_anchor,
            "hidden_size_edge_presence": self.hidden_size_edge_presence,
            "hidden_size_edge_label": self.hidden_size_edge_label,
            "dropout_transformer": self.dropout_transformer,
            "dropout_attention": self.dropout_attention,
            "encoder": self.encoder,
            "external_dim": self.external_dim,
            "n_hash_buckets": self.n_hash_buckets,
            "threshold_presence": self.threshold_presence,
            "threshold_anchor": self.threshold_anchor,
            "threshold_edge": self.threshold_edge,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["event_types"] = tuple(d["event_types"])
        d["roles"] = tuple(d["roles"])
        return cls(**d)


@dataclass
class ParseOutput:
    """Head logits for one sentence; row 0 of the edge axes is the top."""

    node_presence_logits: Tensor   # (T*n,)
    anchor_logits: Tensor          # (T*n, T)
    edge_presence_logits: Tensor   # (T*n+1, T*n)
    edge_label_logits: Tensor      # (T*n+1, T*n, L)

    @property
    def n_queries(self) -> int:
        return self.node_presence_logits.data.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.anchor_logits.data.shape[1]


class _BiaffineHead:
    """Gelu-projected source/target vectors scored by the biaffine op."""

    def __init__(self, store, name, d_model, hidden, k, rng):
        self.src = Linear(store, name + ".src", d_model, hidden, rng)
        self.tgt = Linear(store, name + ".tgt", d_model, hidden, rng)
        self.u = store.add(name + ".u", np.zeros((hidden, k, hidden)))
        self.w = store.add(name + ".w", np.zeros((2 * hidden, k)))
        self.bias = store.add(name + ".bias", np.zeros(k))

    def __call__(self, x: Tensor, y: Tensor) -> Tensor:
        return T.biaffine(T.gelu(self.src(x)), T.gelu(self.tgt(y)), self.u,
                          self.w, self.bias)


def _token_pieces(token: str) -> list[str]:
    """Hash keys for one token: two salted whole-token keys plus trigrams."""
    pieces = ["w0|" + token, "w1|" + token]
    if len(token) > 3:
        grams = [token[i : i + 3] for i in range(len(token) - 2)]
        if len(grams) > 5:
            grams = grams[:4] + [grams[-1]]
        pieces.extend("g|" + g for g in grams)
    return pieces


class EventParser:
    def __init__(self, config: ModelConfig, store: ParameterStore, blocks):
        self.config = config
        self.store = store
        self._enc_blocks, self._dec_blocks, self._parts = blocks

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0, dtype=np.float32) -> "EventParser":
        rng = np.random.default_rng(seed)
        store = ParameterStore(dtype=dtype)
        d = config.d_model
        parts: dict = {}
        if config.encoder == "toy":
            parts["emb"] = store.add(
                "encoder.pieces.emb",
                rng.normal(0.0, 0.02, size=(config.n_hash_buckets, d)),
            )
            parts["pool_w"] = store.add("encoder.pool.w", _xavier_vec(rng, d))
            parts["pool_b"] = store.add("encoder.pool.b", np.zeros(1))
        else:
            parts["proj"] = Linear(store, "encoder.proj", config.external_dim, d, rng)
        enc_blocks = [
            SelfAttentionBlock(store, f"encoder.layer{i}", d, config.n_heads, rng)
            for i in range(config.n_encoder_layers if config.encoder == "toy" else 0)
        ]
        parts["queries"] = Linear(store, "decoder.queries", d,
                                  config.n_queries_per_token * d, rng)
        dec_blocks = [
            SelfAttentionBlock(store, f"decoder.layer{i}", d, config.n_heads, rng)
            for i in range(config.n_decoder_layers)
        ]
        parts["top"] = store.add("decoder.top", rng.normal(0.0, 0.02, size=(1, d)))
        parts["presence"] = Linear(store, "heads.presence", d, 1, rng, init="zeros")
        parts["anchor"] = _BiaffineHead(store, "heads.anchor", d,
                                        config.hidden_size_anchor, 1, rng)
        parts["edge_p"] = _BiaffineHead(store, "heads.edge_presence", d,
                                        config.hidden_size_edge_presence, 1, rng)
        parts["edge_l"] = _BiaffineHead(store, "heads.edge_label", d,
                                        config.hidden_size_edge_label,
                                        len(config.edge_labels), rng)
        return cls(config, store, (enc_blocks, dec_blocks, parts))

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict[str, np.ndarray],
                    dtype=np.float32) -> "EventParser":
        parser = cls.build(config, seed=0, dtype=dtype)
        parser.store.load_state(arrays)
        return parser

    # -- forward pieces ----------------------------------------------------

    def make_dropout(self, seed: int, step: int, slot: int):
        """Per-site dropout callable for one training pass."""
        cfg = self.config

        def drop(t: Tensor, site: str) -> Tensor:
            rate = cfg.dropout_attention if site.endswith("attn_probs") \
                else cfg.dropout_transformer
            if rate <= 0.0:
                return t
            return T.dropout(t, rate, dropout_stream(seed, step, slot, site))

        return drop

    def embed_sentence(self, sentence: Sentence, drop=None,
                       embeddings: dict[str, np.ndarray] | None = None) -> Tensor:
        cfg = self.config
        dtype = self.store.dtype
        if cfg.encoder == "external":
            if embeddings is None or sentence.id not in embeddings:
                raise EmbeddingLookupError(
                    f"no external embedding for sentence {sentence.id!r}"
                )
            vec = np.asarray(embeddings[sentence.id], dtype=dtype)
            if vec.ndim != 2 or vec.shape != (len(sentence.tokens), cfg.external_dim):
                raise EmbeddingLookupError(
                    f"embedding for {sentence.id!r} has shape {vec.shape}, "
                    f"expected ({len(sentence.tokens)}, {cfg.external_dim})"
                )
            return self._parts["proj"](Tensor(vec))
        piece_lists = [_token_pieces(tok) for tok in sentence.tokens]
        n_tok = len(piece_lists)
        width = max(len(p) for p in piece_lists)
        ids = np.zeros((n_tok, width), dtype=np.intp)
        mask = np.zeros((n_tok, width), dtype=bool)
        for i, pieces in enumerate(piece_lists):
            for j, piece in enumerate(pieces):
                ids[i, j] = zlib.crc32(piece.encode("utf-8")) % cfg.n_hash_buckets
                mask[i, j] = True
        flat = T.gather_rows(self._parts["emb"], ids.ravel())
        pieces_t = T.reshape(flat, (n_tok, width, cfg.d_model))
        x = pool_subwords(pieces_t, self._parts["pool_w"], self._parts["pool_b"], mask)
        if not self._enc_blocks:
            x = T.add_const(x, sinusoidal_positions(n_tok, cfg.d_model, dtype))
        for i, block in enumerate(self._enc_blocks):
            x = block(x, use_positional=(i == 0), drop=drop)
        return x

    def generate_queries(self, token_embeddings: Tensor) -> Tensor:
        n_tok = token_embeddings.data.shape[0]
        cfg = self.config
        wide = self._parts["queries"](token_embeddings)
        return T.reshape(wide, (n_tok * cfg.n_queries_per_token, cfg.d_model))

    def run_decoder(self, queries: Tensor, drop=None) -> Tensor:
        x = queries
        for block in self._dec_blocks:
            x = block(x, use_positional=False, drop=drop)
        return x

    def score_heads(self, augmented_queries: Tensor,
                    token_embeddings: Tensor) -> ParseOutput:
        q = augmented_queries
        n_q = q.data.shape[0]
        n_tok = token_embeddings.data.shape[0]
        parts = self._parts
        presence = T.reshape(parts["presence"](q), (n_q,))
        anchors = T.reshape(parts["anchor"](q, token_embeddings), (n_q, n_tok))
        sources = T.concat_rows([parts["top"], q])
        edge_p = T.reshape(parts["edge_p"](sources, q), (n_q + 1, n_q))
        edge_l = parts["edge_l"](sources, q)
        return ParseOutput(presence, anchors, edge_p, edge_l)

    def forward(self, sentence: Sentence, drop=None,
                embeddings: dict[str, np.ndarray] | None = None) -> ParseOutput:
        tok = self.embed_sentence(sentence, drop=drop, embeddings=embeddings)
        queries = self.generate_queries(tok)
        augmented = self.run_decoder(queries, drop=drop)
        return self.score_heads(augmented, tok)

    # -- inference ---------------------------------------------------------

    def decode_output(self, output: ParseOutput) -> list[EventMention]:
        """Threshold the logits into a set of event mentions."""
        cfg = self.config
        pres = np_sigmoid(np.asarray(output.node_presence_logits.data, np.float64))
        anch = np_sigmoid(np.asarray(output.anchor_logits.data, np.float64))
        edge_p = np_sigmoid(np.asarray(output.edge_presence_logits.data, np.float64))
        edge_l = np.asarray(output.edge_label_logits.data, np.float64)
        n_types = len(cfg.event_types)
        spans: dict[int, Span] = {}
        for row in np.flatnonzero(pres > cfg.threshold_presence):
            span = _longest_run(anch[row] > cfg.threshold_anchor)
            if span is not None:
                spans[int(row)] = span
        triggers = [
            q for q in spans if edge_p[0, q] > cfg.threshold_edge
        ]
        mentions: dict[tuple[Span, str], dict[tuple[str, Span], None]] = {}
        for q in triggers:
            etype = cfg.event_types[int(np.argmax(edge_l[0, q, :n_types]))]
            args = mentions.setdefault((spans[q], etype), {})
            for q_t, span_t in spans.items():
                if q_t in triggers or edge_p[q + 1, q_t] <= cfg.threshold_edge:
                    continue
                role = cfg.roles[int(np.argmax(edge_l[q + 1, q_t, n_types:]))]
                args.setdefault((role, span_t))
        return [
            EventMention(trigger=span, event_type=etype, arguments=tuple(args))
            for (span, etype), args in mentions.items()
        ]

    def predict_mentions(self, sentence: Sentence,
                         embeddings=None) -> list[EventMention]:
        with T.no_grad():
            output = self.forward(sentence, embeddings=embeddings)
        return self.decode_output(output)

    def predict_graph(self, sentence: Sentence, embeddings=None) -> EventGraph:
        return encode_graph(sentence, self.predict_mentions(sentence, embeddings))

    # -- parameter bookkeeping --------------------------------------------

    def parameter_groups(self) -> list[dict]:
        encoder = [(n, t) for n, t in self.store.items() if n.startswith("encoder.")]
        decoder = [(n, t) for n, t in self.store.items() if not n.startswith("encoder.")]
        return [
            {"name": "encoder", "params": encoder},
            {"name": "decoder", "params": decoder},
        ]


def _xavier_vec(rng, d):
    limit = np.sqrt(6.0 / (d + 1))
    return rng.uniform(-limit, limit, size=(d, 1))


def _longest_run(mask: np.ndarray) -> Span | None:
    """Longest contiguous True run; earliest wins ties; None if all False."""
    best = None
    start = None
    for i, flag in enumerate(list(mask) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return Span(*best) if best else None


def _stable_bce(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _anchor_mask(node, n_tokens: int) -> np.ndarray:
    mask = np.zeros(n_tokens)
    for span in node.anchors:
        mask[span.start : span.end] = 1.0
    return mask


def _canonical_nodes(gold: EventGraph) -> list:
    """Gold non-top nodes in an order independent of their input order."""
    top_label = {}
    for e in gold.edges:
        if e.source == gold.top:
            top_label[e.target] = e.label

    def key(node):
        anchors = tuple((s.start, s.end) for s in node.anchors)
        if node.id in top_label:
            return (anchors, 0, top_label[node.id])
        return (anchors, 1, "")

    return sorted((n for n in gold.nodes if n.id != gold.top), key=key)


def solve_assignment(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost injective assignment of rows to columns (rows <= cols).

    Returns (row, column) pairs in row order.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] > cost.shape[1]:
        raise ValueError(f"cost matrix {cost.shape} needs rows <= columns")
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def match_targets(output: ParseOutput, gold: EventGraph) -> tuple[tuple[int, int], ...]:
    """Assign each gold non-top node a query row, minimizing matching cost.

    Cost of (node, query) is the query's presence loss toward target 1 plus
    the mean anchor loss against the node's gold anchor mask.  Returns
    (node_id, query_row) pairs sorted by query row.  The cost matrix is
    built over canonically ordered nodes, so the result does not depend on
    the order nodes appear in ``gold``.
    """
    nodes = _canonical_nodes(gold)
    n_q = output.n_queries
    if len(nodes) > n_q:
        raise CapacityError(
            f"sentence {gold.sentence_id!r}: {len(nodes)} gold nodes exceed "
            f"{n_q} queries"
        )
    if not nodes:
        return ()
    pres = np.asarray(output.node_presence_logits.data, np.float64)
    anch = np.asarray(output.anchor_logits.data, np.float64)
    n_tok = anch.shape[1]
    masks = np.stack([_anchor_mask(n, n_tok) for n in nodes])
    cost = _stable_bce(pres, 1.0)[None, :] \
        + _stable_bce(anch[None, :, :], masks[:, None, :]).mean(axis=2)
    pairs = [(nodes[r].id, c) for r, c in solve_assignment(cost)]
    return tuple(sorted(pairs, key=lambda p: p[1]))


def training_loss(output: ParseOutput, gold: EventGraph,
                  assignment: tuple[tuple[int, int], ...],
                  w_node: float = 1.0, w_anchor: float = 1.0,
                  w_edge_presence: float = 1.0, w_edge_label: float = 1.0,
                  edge_label_index: dict[str, int] | None = None):
    """Matched set-prediction loss; returns (total Tensor, float breakdown).

    ``edge_label_index`` maps edge label string to its logit column; it is
    required whenever the gold graph has edges.
    """
    n_q = output.n_queries
    n_tok = output.n_tokens
    node_by_id = {n.id: n for n in gold.nodes}
    query_of = {node_id: q for node_id, q in assignment}
    matched_q = np.array(sorted(query_of.values()), dtype=np.intp)

    presence_targets = np.zeros(n_q)
    presence_targets[matched_q] = 1.0
    l_node = T.bce_with_logits(output.node_presence_logits, presence_targets)

    terms = [T.scale(l_node, w_node)]
    breakdown = {"node": float(l_node.data), "anchor": 0.0,
                 "edge_presence": 0.0, "edge_label": 0.0}

    if matched_q.size:
        id_of_query = {q: nid for nid, q in assignment}
        masks = np.stack([_anchor_mask(node_by_id[id_of_query[q]], n_tok)
                          for q in matched_q])
        sub = T.gather_rows(output.anchor_logits, matched_q)
        l_anchor = T.bce_with_logits(sub, masks)
        terms.append(T.scale(l_anchor, w_anchor))
        breakdown["anchor"] = float(l_anchor.data)

        # source index: 0 = top, otherwise query row + 1
        gold_edges = {}
        for e in gold.edges:
            src = 0 if e.source == gold.top else query_of[e.source] + 1
            gold_edges[(src, query_of[e.target])] = e.label
        src_rows = np.concatenate([[0], matched_q + 1]).astype(np.intp)
        pair_rows = np.repeat(src_rows, matched_q.size)
        pair_cols = np.tile(matched_q, src_rows.size)
        pair_targets = np.array(
            [1.0 if (r, c) in gold_edges else 0.0
             for r, c in zip(pair_rows, pair_cols)]
        )
        sub_edges = T.gather_pairs(output.edge_presence_logits, pair_rows, pair_cols)
        l_edge_p = T.bce_with_logits(sub_edges, pair_targets)
        terms.append(T.scale(l_edge_p, w_edge_presence))
        breakdown["edge_presence"] = float(l_edge_p.data)

        if gold_edges:
            if edge_label_index is None:
                raise ValueError("edge_label_index required when gold has edges")
            pos = sorted(gold_edges)
            pos_rows = np.array([r for r, _ in pos], dtype=np.intp)
            pos_cols = np.array([c for _, c in pos], dtype=np.intp)
            label_idx = np.array([edge_label_index[gold_edges[p]] for p in pos],
                                 dtype=np.intp)
            sub_labels = T.gather_pairs(output.edge_label_logits, pos_rows, pos_cols)
            l_edge_l = T.softmax_ce(sub_labels, label_idx)
            terms.append(T.scale(l_edge_l, w_edge_label))
            breakdown["edge_label"] = float(l_edge_l.data)

    total = terms[0]
    for term in terms[1:]:
        total = T.add(total, term)
    breakdown["total"] = float(total.data)
    return total, breakdown
