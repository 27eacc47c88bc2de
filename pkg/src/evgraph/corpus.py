"""Corpus and graph file I/O, synthetic corpus generation, and statistics.

Two line-delimited JSON formats (UTF-8, LF newlines):

* mention corpus, one sentence per line::

    {"sent_id": str, "tokens": [str, ...],
     "events": [{"trigger": {"start": int, "end": int, "type": str},
                 "arguments": [{"start": int, "end": int, "role": str}, ...]},
                ...]}

* event graphs, one graph per line::

    {"id": str, "tops": [int],
     "nodes": [{"id": int, "anchors": [{"start": int, "end": int}, ...]}, ...],
     "edges": [{"source": int, "target": int, "label": str}, ...]}

Spans are half-open token ranges (end exclusive).  Files written by this
module are canonical: reading one back and rewriting it is byte-stable.
The label ontology is inferred from the data unless one is declared, in
which case unseen labels fail fast.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorpusFormatError,
    DuplicateAnnotationError,
    EmbeddingLookupError,
    GraphValidationError,
    SpanBoundsError,
)
from .graphs import Edge, EventGraph, EventMention, Node, Sentence, Span, validate_graph

__all__ = [
    "Ontology",
    "Corpus",
    "CorpusStats",
    "read_corpus",
    "write_corpus",
    "read_graphs",
    "write_graphs",
    "read_ontology",
    "read_embeddings",
    "write_embeddings",
    "gen_synthetic",
    "compute_stats",
    "infer_format",
]


@dataclass(frozen=True)
class Ontology:
    """The label sets a corpus or model operates over."""

    event_types: tuple[str, ...]
    roles: tuple[str, ...]

    def __contains__(self, label: str) -> bool:
        return label in self.event_types or label in self.roles


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of sentences with their event mentions."""

    entries: tuple[tuple[Sentence, tuple[EventMention, ...]], ...]
    ontology: Ontology

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def sentence_ids(self) -> list[str]:
        return [s.id for s, _ in self.entries]

    def mentions_by_id(self) -> dict[str, tuple[EventMention, ...]]:
        return {s.id: ms for s, ms in self.entries}

    @classmethod
    def from_entries(cls, entries, ontology: Ontology | None = None) -> "Corpus":
        entries = tuple((s, tuple(ms)) for s, ms in entries)
        ids = [s.id for s, _ in entries]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise CorpusFormatError(f"duplicate sentence id {dup!r}")
        if ontology is None:
            types = sorted({m.event_type for _, ms in entries for m in ms})
            roles = sorted({r for _, ms in entries for m in ms for r, _ in m.arguments})
            ontology = Ontology(tuple(types), tuple(roles))
        else:
            for s, ms in entries:
                for m in ms:
                    if m.event_type not in ontology.event_types:
                        raise CorpusFormatError(
                            f"sentence {s.id!r}: event type {m.event_type!r} "
                            "is not in the declared ontology"
                        )
                    for role, _ in m.arguments:
                        if role not in ontology.roles:
                            raise CorpusFormatError(
                                f"sentence {s.id!r}: role {role!r} is not in "
                                "the declared ontology"
                            )
        return cls(entries, ontology)


def _iter_json_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{path}: line {lineno}: {e}") from e


def _parse_span(obj, lineno, path, n_tokens, what) -> Span:
    try:
        span = Span(int(obj["start"]), int(obj["end"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CorpusFormatError(f"{path}: line {lineno}: bad {what} span: {e}") from e
    if n_tokens is not None and span.end > n_tokens:
        raise SpanBoundsError(
            f"{path}: line {lineno}: {what} span [{span.start}, {span.end}) "
            f"exceeds sentence length {n_tokens}"
        )
    return span


def read_corpus(path, ontology: Ontology | None = None) -> Corpus:
    """Read a mention corpus; malformed lines are reported with line numbers."""
    entries = []
    seen_ids = set()
    for lineno, obj in _iter_json_lines(path):
        try:
            sent_id = obj["sent_id"]
            tokens = obj["tokens"]
        except (KeyError, TypeError) as e:
            raise CorpusFormatError(f"{path}: line {lineno}: not a corpus record: {e}") from e
        if sent_id in seen_ids:
            raise CorpusFormatError(f"{path}: line {lineno}: duplicate sentence id {sent_id!r}")
        seen_ids.add(sent_id)
        try:
            sentence = Sentence(sent_id, tuple(tokens))
        except ValueError as e:
            raise CorpusFormatError(f"{path}: line {lineno}: {e}") from e
        mentions = []
        for ev in obj.get("events", []):
            trig = ev.get("trigger")
            if not isinstance(trig, dict) or "type" not in trig:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: event without a typed trigger"
                )
            trigger = _parse_span(trig, lineno, path, len(sentence), "trigger")
            args = []
            for arg in ev.get("arguments", []):
                if "role" not in arg:
                    raise CorpusFormatError(
                        f"{path}: line {lineno}: argument without a role"
                    )
                args.append(
                    (arg["role"], _parse_span(arg, lineno, path, len(sentence), "argument"))
                )
            try:
                mentions.append(EventMention(trigger, trig["type"], tuple(args)))
            except DuplicateAnnotationError as e:
                raise DuplicateAnnotationError(f"{path}: line {lineno}: {e}") from e
        entries.append((sentence, tuple(mentions)))
    return Corpus.from_entries(entries, ontology)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sentence, mentions in corpus:
            obj = {
                "sent_id": sentence.id,
                "tokens": list(sentence.tokens),
                "events": [
                    {
                        "trigger": {
                            "start": m.trigger.start,
                            "end": m.trigger.end,
                            "type": m.event_type,
                        },
                        "arguments": [
                            {"start": s.start, "end": s.end, "role": r}
                            for r, s in m.arguments
                        ],
                    }
                    for m in mentions
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_graphs(path) -> list[EventGraph]:
    """Read an event-graph file; every graph is validated on load."""
    graphs = []
    for lineno, obj in _iter_json_lines(path):
        try:
            tops = obj["tops"]
            if len(tops) != 1:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: expected exactly one top node, got {len(tops)}"
                )
            nodes = tuple(
                Node(
                    int(n["id"]),
                    tuple(
                        _parse_span(a, lineno, path, None, "anchor")
                        for a in n.get("anchors", [])
                    ),
                )
                for n in obj["nodes"]
            )
            edges = tuple(
                Edge(int(e["source"]), int(e["target"]), e["label"])
                for e in obj["edges"]
            )
            graph = EventGraph(obj["id"], nodes, edges, top=int(tops[0]))
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusFormatError(f"{path}: line {lineno}: not a graph record: {e}") from e
        result = validate_graph(graph)
        if not result:
            raise GraphValidationError(f"{path}: line {lineno}: {result.message}")
        graphs.append(graph)
    return graphs


def write_graphs(graphs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in graphs:
            obj = {
                "id": g.sentence_id,
                "tops": [g.top],
                "nodes": [
                    {
                        "id": n.id,
                        "anchors": [{"start": s.start, "end": s.end} for s in n.anchors],
                    }
                    for n in g.nodes
                ],
                "edges": [
                    {"source": e.source, "target": e.target, "label": e.label}
                    for e in g.edges
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_ontology(path) -> Ontology:
    """Read an explicit ontology file: {"event_types": [...], "roles": [...]}."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
            return Ontology(tuple(obj["event_types"]), tuple(obj["roles"]))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise CorpusFormatError(f"{path}: not an ontology file: {e}") from e


def infer_format(path) -> str:
    """Peek at the first record to tell mention corpora from graph files."""
    for _, obj in _iter_json_lines(path):
        if "tokens" in obj:
            return "mentions"
        if "nodes" in obj and "edges" in obj:
            return "graphs"
        raise CorpusFormatError(f"{path}: first record matches neither file format")
    return "mentions"


# ---------------------------------------------------------------------------
# External token embeddings (for the external-encoder mode)
# ---------------------------------------------------------------------------


def read_embeddings(path) -> dict[str, np.ndarray]:
    """Read per-token embedding vectors keyed by sentence id.

    Format: one JSON object per line, {"sent_id": str, "vectors": [[f, ...], ...]}
    with one inner list per token.  All vectors in a file must share a width.
    """
    table: dict[str, np.ndarray] = {}
    width = None
    for lineno, obj in _iter_json_lines(path):
        try:
            sent_id = obj["sent_id"]
            vectors = np.asarray(obj["vectors"], dtype=np.float32)
        except (KeyError, TypeError, ValueError) as e:
            raise EmbeddingLookupError(f"{path}: line {lineno}: {e}") from e
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise EmbeddingLookupError(
                f"{path}: line {lineno}: vectors for {sent_id!r} are not a "
                "non-empty rectangular matrix"
            )
        if width is None:
            width = vectors.shape[1]
        elif vectors.shape[1] != width:
            raise EmbeddingLookupError(
                f"{path}: line {lineno}: vector width {vectors.shape[1]} for "
                f"{sent_id!r} differs from {width}"
            )
        if sent_id in table:
            raise EmbeddingLookupError(f"{path}: line {lineno}: duplicate sentence id {sent_id!r}")
        table[sent_id] = vectors
    return table


def write_embeddings(table: dict[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sent_id, vectors in table.items():
            obj = {"sent_id": sent_id, "vectors": [[float(x) for x in row] for row in np.asarray(vectors)]}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

_TYPE_NAMES = ("Attack", "Transfer", "Meet", "Build", "Depart",
               "Arrest", "Rescue", "Elect", "Protest", "Trade")
_ROLE_NAMES = ("Agent", "Target", "Place", "Origin", "Instrument",
               "Helper", "Goal", "Theme", "Beneficiary", "Extent")
_FILLERS = ("the", "report", "said", "that", "officials", "later",
            "near", "town", "sources", "again", "yesterday", "local")
_MODIFIERS = ("big", "old", "new", "tall", "grey", "quiet")
_CONNECTORS = ("and", "while", "then", "as")


def _names(base: tuple[str, ...], n: int, prefix: str) -> tuple[str, ...]:
    return tuple(base[i] if i < len(base) else f"{prefix}{i}" for i in range(n))


def gen_synthetic(seed: int, n_sentences: int,
                  ontology_size: tuple[int, int] = (5, 6)) -> Corpus:
    """Generate a deterministic synthetic event corpus.

    Sentences carry 0-3 events.  Trigger tokens identify their event type
    and argument head tokens identify their role, so the task is learnable
    from lexical cues alone.  Arguments may be shared between events (with
    the same or different roles), nested inside longer arguments, longer
    than 5 tokens, and triggers may span 2 tokens, so every structure the
    graph encoding supports occurs with non-trivial frequency.
    """
    n_types, n_roles = ontology_size
    if n_sentences < 1 or n_types < 1 or n_roles < 1:
        raise ValueError("need at least one sentence, one event type, and one role")
    rng = random.Random(seed)
    event_types = _names(_TYPE_NAMES, n_types, "EType")
    roles = _names(_ROLE_NAMES, n_roles, "Role")
    trigger_forms = [
        ((t.lower() + "ed",), (t.lower() + "s",), (t.lower() + "ed", "off"))
        for t in event_types
    ]

    def arg_phrase(role: str) -> list[str]:
        head = role.lower()
        u = rng.random()
        if u < 0.40:
            return [head]
        if u < 0.70:
            return ["the", head]
        if u < 0.90:
            return ["the", rng.choice(_MODIFIERS), head]
        mods = [rng.choice(_MODIFIERS) for _ in range(3)]
        return ["the", "very", *mods, head]  # 6 tokens: exercises span overlap

    entries = []
    for i in range(n_sentences):
        tokens: list[str] = [rng.choice(_FILLERS) for _ in range(rng.randint(1, 2))]
        n_events = rng.choices((0, 1, 2, 3), weights=(25, 40, 25, 10))[0]
        placed: list[tuple[str, Span]] = []  # all argument placements so far
        mentions = []
        for _ in range(n_events):
            if mentions:
                tokens.append(rng.choice(_CONNECTORS))
            type_idx = rng.randrange(n_types)
            forms = trigger_forms[type_idx]
            form = rng.choices(forms, weights=(45, 40, 15))[0]
            trig = Span(len(tokens), len(tokens) + len(form))
            tokens.extend(form)
            args: list[tuple[str, Span]] = []
            for role in rng.sample(roles, k=min(rng.choice((1, 2)), n_roles)):
                u = rng.random()
                # sharing happens across events only: one span filling two
                # roles of the same event needs two labels on one edge pair,
                # which the pair classifiers cannot express
                own = {s for _, s in args}
                host_pool = [s for _, s in placed if s not in own]
                multi_hosts = [s for s in host_pool if len(s) > 1]
                if host_pool and u < 0.25:
                    span = rng.choice(host_pool)
                elif multi_hosts and u < 0.45:
                    # nested: the head token of an earlier multi-token argument
                    host = rng.choice(multi_hosts)
                    span = Span(host.end - 1, host.end)
                else:
                    if args or rng.random() < 0.5:
                        tokens.append(rng.choice(_FILLERS))
                    phrase = arg_phrase(role)
                    span = Span(len(tokens), len(tokens) + len(phrase))
                    tokens.extend(phrase)
                if span in own:
                    continue  # nested head collided with an own span: skip
                args.append((role, span))
                placed.append((role, span))
            mentions.append(EventMention(trig, event_types[type_idx], tuple(args)))
        tokens.append(".")
        entries.append((Sentence(f"syn-{i:06d}", tuple(tokens)), tuple(mentions)))
    return Corpus(tuple(entries), Ontology(event_types, roles))


# ---------------------------------------------------------------------------
# Corpus statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    event_count: int
    role_count: int
    avg_trigger_len: float
    avg_arg_len: float
    single_token_arg_pct: float
    multi_token_arg_pct: float

    def to_dict(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "event_count": self.event_count,
            "role_count": self.role_count,
            "avg_trigger_len": self.avg_trigger_len,
            "avg_arg_len": self.avg_arg_len,
            "single_token_arg_pct": self.single_token_arg_pct,
            "multi_token_arg_pct": self.multi_token_arg_pct,
        }

    def format(self) -> str:
        rows = [
            ("sentences", f"{self.sentence_count}"),
            ("events", f"{self.event_count}"),
            ("argument instances", f"{self.role_count}"),
            ("avg trigger length", f"{self.avg_trigger_len:.2f}"),
            ("avg argument length", f"{self.avg_arg_len:.2f}"),
            ("single-token arguments", f"{self.single_token_arg_pct:.1f}%"),
            ("multi-token arguments", f"{self.multi_token_arg_pct:.1f}%"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Count events and argument instances and average their span lengths."""
    trigger_lens = []
    arg_lens = []
    for _, mentions in corpus:
        for m in mentions:
            trigger_lens.append(len(m.trigger))
            arg_lens.extend(len(s) for _, s in m.arguments)
    n_args = len(arg_lens)
    single = sum(1 for x in arg_lens if x == 1)
    return CorpusStats(
        sentence_count=len(corpus),
        event_count=len(trigger_lens),
        role_count=n_args,
        avg_trigger_len=sum(trigger_lens) / len(trigger_lens) if trigger_lens else 0.0,
        avg_arg_len=sum(arg_lens) / n_args if n_args else 0.0,
        single_token_arg_pct=100.0 * single / n_args if n_args else 0.0,
        multi_token_arg_pct=100.0 * (n_args - single) / n_args if n_args else 0.0,
    )
