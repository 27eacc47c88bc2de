"""Span-based evaluation of predicted event mentions against gold.

Three metrics, each as precision/recall/F1 over one-to-one matched items
within each sentence:

* trigger classification: a predicted trigger counts when its span and
  event type both equal a gold trigger's;
* argument classification: an argument instance is the triple
  (event type, role, span) drawn from each mention; ``perfect`` mode
  requires span equality, while ``overlap80`` relaxes the span test for
  gold arguments longer than 5 tokens to a token-level overlap of at
  least 80% of the gold span (shorter gold arguments still require a
  perfect match);
* event-presence accuracy: the fraction of sentences where prediction and
  gold agree on whether the sentence contains any event at all.

Matching within a sentence is maximum bipartite matching, so duplicated
predictions are never credited twice.  Counts merge associatively across
sentences and may be computed in parallel.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Corpus
from .errors import AlignmentError
from .graphs import EventMention, Span

__all__ = [
    "PRF",
    "ScoreReport",
    "span_matches",
    "score_triggers",
    "score_arguments",
    "presence_accuracy",
    "score_all",
    "format_report",
]


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    n_pred: int
    n_gold: int

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gold: int) -> "PRF":
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, n_pred, n_gold)

    def to_dict(self) -> dict:
        return {
            "p": self.precision,
            "r": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
        }


@dataclass(frozen=True)
class ScoreReport:
    trg_c: PRF
    arg_c_perfect: PRF
    arg_c_overlap: PRF
    presence_accuracy: float

    def to_dict(self) -> dict:
        return {
            "trg_c": self.trg_c.to_dict(),
            "arg_c_perfect": self.arg_c_perfect.to_dict(),
            "arg_c_overlap": self.arg_c_overlap.to_dict(),
            "presence_accuracy": self.presence_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _aligned(pred: Corpus, gold: Corpus):
    pred_by_id = pred.mentions_by_id()
    gold_by_id = gold.mentions_by_id()
    if set(pred_by_id) != set(gold_by_id):
        missing = sorted(set(gold_by_id) - set(pred_by_id))[:5]
        extra = sorted(set(pred_by_id) - set(gold_by_id))[:5]
        raise AlignmentError(
            f"pred and gold sentence ids differ (missing from pred: {missing}, "
            f"unknown to gold: {extra})"
        )
    return [(sid, pred_by_id[sid], gold_by_id[sid]) for sid, _ in gold_by_id.items()]


def _max_matching(pred_items, gold_items, compatible) -> int:
    """Size of the maximum one-to-one matching under a compatibility test."""
    if not pred_items or not gold_items:
        return 0
    profit = np.fromiter(
        (1.0 if compatible(p, g) else 0.0 for p in pred_items for g in gold_items),
        dtype=float,
        count=len(pred_items) * len(gold_items),
    ).reshape(len(pred_items), len(gold_items))
    if not profit.any():
        return 0
    rows, cols = linear_sum_assignment(profit, maximize=True)
    return int(round(profit[rows, cols].sum()))


def _trigger_items(mentions) -> list[tuple[Span, str]]:
    return [(m.trigger, m.event_type) for m in mentions]


def _argument_items(mentions) -> list[tuple[str, str, Span]]:
    return [(m.event_type, role, span) for m in mentions for role, span in m.arguments]


def span_matches(pred: Span, gold: Span, mode: str) -> bool:
    """Span test for argument scoring.

    ``overlap80`` only relaxes gold spans longer than 5 tokens: those match
    when the token overlap covers at least 80% of the gold span (compared
    in exact integer arithmetic).  Gold spans of up to 5 tokens always
    require equality.
    """
    if mode == "perfect" or len(gold) <= 5:
        return pred == gold
    if mode != "overlap80":
        raise ValueError(f"unknown span-matching mode {mode!r}")
    return 5 * pred.overlap(gold) >= 4 * len(gold)


def _sentence_counts(pred_mentions, gold_mentions, mode: str | None):
    """(tp, n_pred, n_gold) for one sentence; mode None scores triggers."""
    if mode is None:
        p_items = _trigger_items(pred_mentions)
        g_items = _trigger_items(gold_mentions)
        compatible = lambda p, g: p == g
    else:
        p_items = _argument_items(pred_mentions)
        g_items = _argument_items(gold_mentions)
        compatible = lambda p, g: (
            p[0] == g[0] and p[1] == g[1] and span_matches(p[2], g[2], mode)
        )
    return _max_matching(p_items, g_items, compatible), len(p_items), len(g_items)


def _total_counts(pred: Corpus, gold: Corpus, mode: str | None,
                  max_workers: int | None = None) -> PRF:
    triples = _aligned(pred, gold)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            counts = list(pool.map(lambda t: _sentence_counts(t[1], t[2], mode), triples))
    else:
        counts = [_sentence_counts(pm, gm, mode) for _, pm, gm in triples]
    tp = sum(c[0] for c in counts)
    n_pred = sum(c[1] for c in counts)
    n_gold = sum(c[2] for c in counts)
    return PRF.from_counts(tp, n_pred, n_gold)


def score_triggers(pred: Corpus, gold: Corpus, max_workers: int | None = None) -> PRF:
    """Trigger classification: span and event type must match."""
    return _total_counts(pred, gold, None, max_workers)


def score_arguments(pred: Corpus, gold: Corpus, mode: str = "perfect",
                    max_workers: int | None = None) -> PRF:
    """Argument classification under ``perfect`` or ``overlap80`` span matching."""
    if mode not in ("perfect", "overlap80"):
        raise ValueError(f"unknown span-matching mode {mode!r}")
    return _total_counts(pred, gold, mode, max_workers)


def presence_accuracy(pred: Corpus, gold: Corpus) -> float:
    """Fraction of sentences where pred and gold agree on event presence."""
    triples = _aligned(pred, gold)
    if not triples:
        return 0.0
    agree = sum(
        1 for _, pm, gm in triples if bool(pm) == bool(gm)
    )
    return agree / len(triples)


def score_all(pred: Corpus, gold: Corpus, max_workers: int | None = None) -> ScoreReport:
    return ScoreReport(
        trg_c=score_triggers(pred, gold, max_workers),
        arg_c_perfect=score_arguments(pred, gold, "perfect", max_workers),
        arg_c_overlap=score_arguments(pred, gold, "overlap80", max_workers),
        presence_accuracy=presence_accuracy(pred, gold),
    )


def format_report(report: ScoreReport) -> str:
    """Render the report as an aligned plain-text table."""
    header = f"{'metric':<18}{'P':>8}{'R':>8}{'F1':>8}{'tp':>7}{'pred':>7}{'gold':>7}"
    lines = [header]
    for name, prf in (
        ("Trg-C", report.trg_c),
        ("Arg-C (perfect)", report.arg_c_perfect),
        ("Arg-C (overlap)", report.arg_c_overlap),
    ):
        lines.append(
            f"{name:<18}{prf.precision:>8.3f}{prf.recall:>8.3f}{prf.f1:>8.3f}"
            f"{prf.tp:>7}{prf.n_pred:>7}{prf.n_gold:>7}"
        )
    lines.append(f"{'Presence':<18}{'accuracy':>8} {report.presence_accuracy:>7.3f}")
    return "\n".join(lines)
