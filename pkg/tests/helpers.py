"""Shared generators and brute-force oracles used across the test suite.

The oracles here are deliberately naive (exhaustive enumeration, direct
recounts) so they stay independent of the library code they check.
"""

from __future__ import annotations

import itertools

import numpy as np

from evgraph import EventMention, Sentence, Span

_VOCAB = (
    "the a troops convoy city port rebels minister crowd fire talks deal "
    "border village region soldiers ship plane council fighters market "
    "protest storm bridge station guards workers strike camp river north"
).split()


def random_sentence(rng: np.random.Generator, sent_id: str,
                    min_len: int = 4, max_len: int = 14) -> Sentence:
    n = int(rng.integers(min_len, max_len + 1))
    return Sentence(sent_id, tuple(rng.choice(_VOCAB) for _ in range(n)))


def random_span(rng: np.random.Generator, n_tokens: int, max_len: int = 4) -> Span:
    length = int(rng.integers(1, min(max_len, n_tokens) + 1))
    start = int(rng.integers(0, n_tokens - length + 1))
    return Span(start, start + length)


def random_mentions(rng: np.random.Generator, sentence: Sentence,
                    types=("Alpha", "Beta", "Gamma"),
                    roles=("R1", "R2", "R3"),
                    max_events: int = 3) -> list[EventMention]:
    """Random mention set exercising shared, nested, and overlapping spans."""
    n_tokens = len(sentence)
    n_events = int(rng.integers(0, max_events + 1))
    mentions = []
    seen_triggers: set[tuple[str, Span]] = set()
    arg_pool: list[Span] = []
    for _ in range(n_events):
        for _attempt in range(10):
            trig = random_span(rng, n_tokens, max_len=2)
            etype = str(rng.choice(types))
            if (etype, trig) not in seen_triggers:
                break
        else:
            continue
        seen_triggers.add((etype, trig))
        args = []
        used: set[tuple[str, Span]] = set()
        for _ in range(int(rng.integers(0, 4))):
            if arg_pool and rng.random() < 0.3:
                span = arg_pool[int(rng.integers(0, len(arg_pool)))]
            elif arg_pool and rng.random() < 0.25:
                # nested sub-span of a previously used multi-token argument
                wide = [s for s in arg_pool if len(s) >= 2]
                if wide:
                    outer = wide[int(rng.integers(0, len(wide)))]
                    span = Span(outer.start, outer.start + 1)
                else:
                    span = random_span(rng, n_tokens)
            else:
                span = random_span(rng, n_tokens)
            role = str(rng.choice(roles))
            if (role, span) in used:
                continue
            used.add((role, span))
            args.append((role, span))
            arg_pool.append(span)
        mentions.append(EventMention(trig, etype, tuple(args)))
    return mentions


def brute_force_assignment_cost(cost: np.ndarray) -> float:
    """Minimum total cost over all injections of rows into columns."""
    cost = np.asarray(cost, dtype=np.float64)
    k, m = cost.shape
    best = np.inf
    rows = np.arange(k)
    for perm in itertools.permutations(range(m), k):
        total = cost[rows, list(perm)].sum()
        if total < best:
            best = total
    return float(best)


def brute_force_matching_tp(pred_items, gold_items, matches) -> int:
    """Maximum one-to-one matching size by exhaustive enumeration.

    ``matches(p, g)`` says whether a pred item may pair with a gold item.
    Only intended for small sides (<= 6).
    """
    if len(pred_items) > len(gold_items):
        pred_items, gold_items = gold_items, pred_items
        inner = matches
        matches = lambda p, g: inner(g, p)  # noqa: E731
    best = 0
    n_gold = len(gold_items)
    for combo in itertools.permutations(range(n_gold), len(pred_items)):
        tp = sum(
            1 for p, gi in zip(pred_items, combo) if matches(p, gold_items[gi])
        )
        best = max(best, tp)
    return best


def mention_key(m: EventMention):
    return (m.trigger, m.event_type, m.arguments)


def same_mention_multiset(a, b) -> bool:
    return sorted(map(mention_key, a)) == sorted(map(mention_key, b))
