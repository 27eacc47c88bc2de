"""Acceptance gate: ten end-to-end criteria, one pass/fail line each.

Run with ``pytest -v tests/test_acceptance.py`` for the per-criterion
verdict lines, or with ``-s`` to also see the measured values.  The two
training criteria (07, 08) dominate the runtime; everything else finishes
in seconds.
"""

import math
import time

import numpy as np

from evgraph import (
    Corpus,
    EventMention,
    ModelConfig,
    Sentence,
    Span,
    TrainConfig,
    encode_graph,
    decode_graph,
    gen_synthetic,
    score_all,
    score_arguments,
    score_triggers,
    solve_assignment,
    span_matches,
    train,
)
from evgraph.cli import main
from evgraph.model import EventParser, match_targets, training_loss
from evgraph.nn.tensor import Tensor
from evgraph.training import predict_corpus

from gradcheck import OP_BATTERY, check_fn, check_module_grads
from helpers import (
    brute_force_assignment_cost,
    brute_force_matching_tp,
    random_mentions,
    random_sentence,
    same_mention_multiset,
)


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num:02d} failed: {detail}"


# -- 01: graph round-trip ---------------------------------------------------


def test_c01_roundtrip_identity_on_1000_mention_sets():
    rng = np.random.default_rng(101)
    n_shared = n_nested = failures = 0
    t0 = time.perf_counter()
    for i in range(1000):
        sent = random_sentence(rng, f"rt{i}")
        mentions = random_mentions(rng, sent)
        back = decode_graph(encode_graph(sent, mentions), sent)
        if not same_mention_multiset(mentions, back):
            failures += 1
        spans = [(j, s) for j, m in enumerate(mentions) for _, s in m.arguments]
        if any(j != k and s == t for j, s in spans for k, t in spans):
            n_shared += 1
        if any(s != t and t.start <= s.start and s.end <= t.end
               for _, s in spans for _, t in spans):
            n_nested += 1
    dt = time.perf_counter() - t0
    ok = failures == 0 and n_shared >= 20 and n_nested >= 20 and dt < 5.0
    _verdict(1, ok, f"{1000 - failures}/1000 round-trips identical "
             f"({n_shared} with shared, {n_nested} with nested arguments) "
             f"in {dt:.2f}s (budget 5s)")


# -- 02: metric oracle ------------------------------------------------------


def _trigger_items(mentions):
    return [(m.trigger, m.event_type) for m in mentions]


def _argument_items(mentions):
    return [(m.event_type, r, s) for m in mentions for r, s in m.arguments]


def _small_mentions(rng, sent):
    # resample until both item families fit the exhaustive matcher
    while True:
        ms = random_mentions(rng, sent, max_events=2)
        if sum(len(m.arguments) for m in ms) <= 4:
            return ms


def test_c02_scores_match_exhaustive_assignment():
    rng = np.random.default_rng(202)
    mismatches = 0
    t0 = time.perf_counter()
    for i in range(500):
        sent = random_sentence(rng, "o", min_len=8, max_len=12)
        gold_ms = _small_mentions(rng, sent)
        pred_ms = _small_mentions(rng, sent)
        gold = Corpus.from_entries([(sent, tuple(gold_ms))])
        pred = Corpus.from_entries([(Sentence("o", sent.tokens), tuple(pred_ms))])

        want_t = brute_force_matching_tp(
            _trigger_items(pred_ms), _trigger_items(gold_ms),
            lambda p, g: p == g)
        if score_triggers(pred, gold).tp != want_t:
            mismatches += 1
        for mode in ("perfect", "overlap80"):
            want_a = brute_force_matching_tp(
                _argument_items(pred_ms), _argument_items(gold_ms),
                lambda p, g: p[0] == g[0] and p[1] == g[1]
                and span_matches(p[2], g[2], mode))
            if score_arguments(pred, gold, mode).tp != want_a:
                mismatches += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 10.0
    _verdict(2, ok, f"0 mismatches across 500 sentences x 3 scores "
             f"in {dt:.2f}s (budget 10s)" if ok else
             f"{mismatches} mismatches in {dt:.2f}s")


# -- 03: overlap semantics --------------------------------------------------


def _one_arg_corpus(span):
    sent = Sentence("s", tuple(f"t{i}" for i in range(10)))
    m = EventMention(Span(8, 9), "A", (("R", span),))
    return Corpus.from_entries([(sent, (m,))])


def test_c03_overlap_relaxation_semantics():
    # 7-token gold argument, 6 tokens overlapped: 6/7 >= 0.8
    gold7, pred6 = _one_arg_corpus(Span(0, 7)), _one_arg_corpus(Span(0, 6))
    case_a = (score_arguments(pred6, gold7, "perfect").tp,
              score_arguments(pred6, gold7, "overlap80").tp)
    # 4-token gold argument, 3 tokens overlapped: short spans need equality
    gold4, pred3 = _one_arg_corpus(Span(0, 4)), _one_arg_corpus(Span(0, 3))
    case_b = (score_arguments(pred3, gold4, "perfect").tp,
              score_arguments(pred3, gold4, "overlap80").tp)

    rng = np.random.default_rng(303)
    violations = 0
    for i in range(1000):
        sent = random_sentence(rng, f"m{i}")
        gold = Corpus.from_entries([(sent, tuple(random_mentions(rng, sent)))])
        pred = Corpus.from_entries(
            [(Sentence(f"m{i}", sent.tokens), tuple(random_mentions(rng, sent)))])
        strict = score_arguments(pred, gold, "perfect")
        relaxed = score_arguments(pred, gold, "overlap80")
        if (relaxed.tp < strict.tp or relaxed.precision < strict.precision
                or relaxed.recall < strict.recall or relaxed.f1 < strict.f1):
            violations += 1

    ok = case_a == (0, 1) and case_b == (0, 0) and violations == 0
    _verdict(3, ok, f"7/6 case tp={case_a} (want (0, 1)), "
             f"4/3 case tp={case_b} (want (0, 0)), "
             f"{violations} monotonicity violations in 1000 corpora")


# -- 04: gradient checks ----------------------------------------------------


def _gradcheck_model():
    cfg = ModelConfig(
        event_types=("A", "B"), roles=("R1", "R2"), d_model=8, n_heads=2,
        n_encoder_layers=1, n_decoder_layers=1, hidden_size_anchor=8,
        hidden_size_edge_presence=8, hidden_size_edge_label=8,
        dropout_transformer=0.0, dropout_attention=0.0, n_hash_buckets=32)
    parser = EventParser.build(cfg, seed=11, dtype=np.float64)
    rng = np.random.default_rng(12)
    for _, p in parser.store.items():
        p.data += 0.05 * rng.standard_normal(p.data.shape)
    return cfg, parser


def test_c04_finite_difference_gradients():
    t0 = time.perf_counter()
    worst_op, worst_name = 0.0, ""
    for name, builder in OP_BATTERY():
        for seed in range(20):
            fn, arrays = builder(np.random.default_rng(seed))
            err = check_fn(fn, arrays)
            if err > worst_op:
                worst_op, worst_name = err, name

    # full loss at a frozen matching (the assignment itself is a discrete
    # choice, not a differentiable quantity)
    cfg, parser = _gradcheck_model()
    sent = Sentence("g", ("u", "v", "w", "x"))
    mentions = [EventMention(Span(0, 1), "A", (("R1", Span(1, 3)),)),
                EventMention(Span(3, 4), "B", (("R2", Span(1, 3)),))]
    graph = encode_graph(sent, mentions)
    label_index = {lab: i for i, lab in enumerate(cfg.edge_labels)}
    assignment = match_targets(parser.forward(sent), graph)

    def loss():
        out = parser.forward(sent)
        return training_loss(out, graph, assignment,
                             edge_label_index=label_index)[0]

    worst_loss = check_module_grads(loss, list(parser.store.items()))
    dt = time.perf_counter() - t0
    ok = worst_op < 1e-4 and worst_loss < 1e-4 and dt < 60.0
    _verdict(4, ok, f"op battery worst rel err {worst_op:.2e} ({worst_name}), "
             f"full loss worst rel err {worst_loss:.2e} (tolerance 1e-4) "
             f"in {dt:.1f}s (budget 60s)")


# -- 05: permutation invariance ---------------------------------------------


def _permuted_graph(graph, rng):
    """Same graph content under a shuffled node order and fresh ids."""
    others = [n for n in graph.nodes if n.id != graph.top]
    order = list(rng.permutation(len(others)))
    relabel = {graph.top: graph.top}
    for new, old in enumerate(order):
        relabel[others[old].id] = graph.top + 1 + new
    nodes = tuple(sorted(
        (type(n)(relabel[n.id], n.anchors) for n in graph.nodes),
        key=lambda n: n.id))
    edges = tuple(sorted(
        (type(e)(relabel[e.source], relabel[e.target], e.label)
         for e in graph.edges),
        key=lambda e: (e.source, e.target, e.label)))
    return type(graph)(graph.sentence_id, nodes, edges)


def test_c05_permutation_invariance():
    cfg = ModelConfig(
        event_types=("A", "B", "C"), roles=("R1", "R2"), d_model=16,
        n_heads=2, n_encoder_layers=1, n_decoder_layers=2,
        hidden_size_anchor=16, hidden_size_edge_presence=16,
        hidden_size_edge_label=16, dropout_transformer=0.0,
        dropout_attention=0.0, n_hash_buckets=128)
    parser = EventParser.build(cfg, seed=21)
    rng = np.random.default_rng(22)
    for _, p in parser.store.items():
        p.data += (0.05 * rng.standard_normal(p.data.shape)).astype(np.float32)
    label_index = {lab: i for i, lab in enumerate(cfg.edge_labels)}

    worst_equiv = 0.0
    for _ in range(100):
        n_q = int(rng.integers(4, 17))
        q = rng.standard_normal((n_q, cfg.d_model)).astype(np.float32)
        perm = rng.permutation(n_q)
        out = parser.run_decoder(Tensor(q)).data
        out_p = parser.run_decoder(Tensor(q[perm])).data
        worst_equiv = max(worst_equiv, float(np.abs(out_p - out[perm]).max()))

    worst_loss = 0.0
    n_checked = 0
    while n_checked < 100:
        sent = random_sentence(rng, f"p{n_checked}", min_len=5, max_len=10)
        mentions = random_mentions(rng, sent, types=cfg.event_types,
                                   roles=cfg.roles, max_events=2)
        if not mentions:
            continue
        graph = encode_graph(sent, mentions)
        shuffled = _permuted_graph(graph, rng)
        out = parser.forward(sent)
        base = training_loss(out, graph, match_targets(out, graph),
                             edge_label_index=label_index)[0]
        other = training_loss(out, shuffled, match_targets(out, shuffled),
                              edge_label_index=label_index)[0]
        worst_loss = max(worst_loss, abs(float(base.data) - float(other.data)))
        n_checked += 1

    ok = worst_equiv <= 1e-5 and worst_loss <= 1e-5
    _verdict(5, ok, f"decoder equivariance max |Δ| {worst_equiv:.2e}, "
             f"loss reorder max |Δ| {worst_loss:.2e} "
             f"(tolerance 1e-5, 100 cases each)")


# -- 06: assignment vs brute force ------------------------------------------


def test_c06_hungarian_matches_brute_force():
    rng = np.random.default_rng(606)
    mismatches = 0
    for _ in range(200):
        k = int(rng.integers(1, 7))
        m = int(rng.integers(k, 13))
        # quarter-integer costs: sums are exact in binary and ties abound
        cost = rng.integers(0, 21, size=(k, m)) / 4.0
        pairs = solve_assignment(cost)
        total = math.fsum(cost[i, j] for i, j in pairs)
        if total != brute_force_assignment_cost(cost):
            mismatches += 1
    _verdict(6, mismatches == 0,
             f"{200 - mismatches}/200 cost matrices (up to 6x12) optimal")


# -- 07 & 08: training ------------------------------------------------------

# shared configuration for the overfit and generalization experiments
_EXP_MODEL = dict(d_model=64, dropout_transformer=0.0, dropout_attention=0.0)
_EXP_TRAIN = dict(batch_size=8, epochs=150, encoder_lr=3e-3, decoder_lr=3e-3,
                  warmup_steps=300, seed=1, eval_every=150)


def _experiment(train_corpus, eval_corpus):
    mcfg = ModelConfig(event_types=train_corpus.ontology.event_types,
                       roles=train_corpus.ontology.roles, **_EXP_MODEL)
    result = train(train_corpus, None, mcfg, TrainConfig(**_EXP_TRAIN))
    report = score_all(predict_corpus(result.parser, eval_corpus), eval_corpus)
    return result, report


def test_c07_overfits_pinned_synthetic_corpus():
    corpus = gen_synthetic(7, 50, (5, 6))
    t0 = time.perf_counter()
    result, report = _experiment(corpus, corpus)
    dt = time.perf_counter() - t0
    losses = [h["loss_terms"]["total"] for h in result.history]
    trg, arg = report.trg_c.f1, report.arg_c_perfect.f1
    pres = report.presence_accuracy
    ok = trg >= 0.99 and arg >= 0.95 and pres >= 0.99 and dt < 600.0
    _verdict(7, ok, f"train-set Trg-C F1 {trg:.4f} (>=0.99), "
             f"Arg-C perfect F1 {arg:.4f} (>=0.95), presence {pres:.4f} "
             f"(>=0.99), loss {losses[0]:.3f}->{losses[-1]:.5f}, "
             f"{len(losses)} epochs in {dt:.0f}s (budget 600s)")


def test_c08_generalizes_to_held_out_sentences():
    train_corpus = gen_synthetic(11, 500, (5, 6))
    held_out = gen_synthetic(12, 100, (5, 6))
    t0 = time.perf_counter()
    _, report = _experiment(train_corpus, held_out)
    dt = time.perf_counter() - t0
    trg = report.trg_c.f1
    perfect, overlap = report.arg_c_perfect.f1, report.arg_c_overlap.f1
    ok = trg >= 0.80 and overlap >= perfect
    _verdict(8, ok, f"held-out Trg-C F1 {trg:.4f} (>=0.80), "
             f"Arg-C overlap {overlap:.4f} >= perfect {perfect:.4f}, "
             f"in {dt:.0f}s")


# -- 09: bit-identical training runs ----------------------------------------


def test_c09_training_is_deterministic(tmp_path):
    src = tmp_path / "train.jsonl"
    assert main(["gen-synthetic", str(src), "--n-sentences", "12",
                 "--seed", "5", "--event-types", "2", "--roles", "2"]) == 0
    argv = ["train", "--train", str(src), "--dev", str(src), "--seed", "9",
            "--set", "d_model=16", "--set", "n_heads=2",
            "--set", "n_encoder_layers=1", "--set", "n_decoder_layers=1",
            "--set", "hidden_size_anchor=16",
            "--set", "hidden_size_edge_presence=16",
            "--set", "hidden_size_edge_label=16",
            "--set", "n_hash_buckets=512", "--set", "batch_size=4",
            "--set", "epochs=12", "--set", "eval_every=6",
            "--set", "warmup_steps=10", "--set", "encoder_lr=0.002",
            "--set", "decoder_lr=0.002",
            "--checkpoint-dir", str(tmp_path / "run")]
    names = ("best.evg", "last.evg", "history.jsonl", "lr_trace.jsonl")

    assert main(list(argv)) == 0
    first = {n: (tmp_path / "run" / n).read_bytes() for n in names}
    assert main(list(argv)) == 0
    identical = [first[n] == (tmp_path / "run" / n).read_bytes() for n in names]

    ok = all(identical)
    _verdict(9, ok, "best/last checkpoints, history, and lr trace "
             "byte-identical across two identical runs" if ok else
             f"identical flags per file {dict(zip(names, identical))}")


# -- 10: learning-rate schedule ---------------------------------------------


def test_c10_lr_trace_matches_closed_form():
    corpus = gen_synthetic(4, 4, (2, 2))
    mcfg = ModelConfig(event_types=corpus.ontology.event_types,
                       roles=corpus.ontology.roles, d_model=8, n_heads=2,
                       n_encoder_layers=1, n_decoder_layers=1,
                       hidden_size_anchor=8, hidden_size_edge_presence=8,
                       hidden_size_edge_label=8, dropout_transformer=0.0,
                       dropout_attention=0.0, n_hash_buckets=64)
    # defaults: warmup_steps 1000; 4 sentences at batch 1 over 280 epochs
    # give 1120 optimizer steps, so the cosine branch is exercised too
    tcfg = TrainConfig(batch_size=1, epochs=280, encoder_lr=2e-3,
                       decoder_lr=1e-3, seed=3, eval_every=280)
    assert tcfg.warmup_steps == 1000
    result = train(corpus, None, mcfg, tcfg)
    trace = result.lr_trace
    total = len(trace)

    def closed(step, peak):
        if step < 1000:
            return peak * step / 1000.0
        progress = (step - 1000) / (total - 1000)
        return peak * 0.5 * (1.0 + math.cos(math.pi * progress))

    probes = (0, 500, 1000, total // 2, total - 1)
    worst = 0.0
    for step in probes:
        rec = trace[step]
        assert rec["step"] == step
        worst = max(worst,
                    abs(rec["encoder"] - closed(step, 2e-3)),
                    abs(rec["decoder"] - closed(step, 1e-3)))
    at_peak = (trace[1000]["encoder"] == 2e-3
               and trace[1000]["decoder"] == 1e-3)
    ok = worst <= 1e-12 and at_peak and total > 1000
    _verdict(10, ok, f"{total}-step trace matches closed form at "
             f"steps {probes} (max |Δ| {worst:.1e} <= 1e-12); "
             f"lr(1000) = peak exactly: {at_peak}")
