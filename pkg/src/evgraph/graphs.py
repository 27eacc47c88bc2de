"""Event mentions, event graphs, and lossless conversion between them.

An event graph represents every event mention of one sentence in a single
directed graph.  Nodes are unlabeled and anchored to token spans; all label
information lives on edges.  A dummy top node roots the graph: its outgoing
edges point at trigger nodes and carry event types, and each trigger node's
outgoing edges point at argument nodes and carry role labels.  This encoding
represents multiple events, arguments shared between events under different
roles, nested spans, and trigger/argument overlap, while staying losslessly
convertible to and from flat event mentions.

Conversion rules:

* one trigger node per mention, in mention order;
* one argument node per distinct argument span (spans shared across mentions
  collapse into a single node);
* two mentions may share a trigger span only if their event types differ
  (each gets its own trigger node, disambiguated by the top-edge label).

All types are immutable values; the three operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateAnnotationError,
    GraphDecodeError,
    GraphValidationError,
    SpanBoundsError,
)

__all__ = [
    "Span",
    "Sentence",
    "EventMention",
    "Node",
    "Edge",
    "EventGraph",
    "ValidationResult",
    "encode_graph",
    "decode_graph",
    "validate_graph",
]

TOP_ID = 0


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token range [start, end) within a sentence."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlap(self, other: "Span") -> int:
        """Number of tokens shared with another span."""
        return max(0, min(self.end, other.end) - max(self.start, other.start))

    def text(self, sentence: "Sentence") -> str:
        return " ".join(sentence.tokens[self.start : self.end])


@dataclass(frozen=True)
class Sentence:
    """A tokenized text unit with a corpus-unique identifier."""

    id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class EventMention:
    """A trigger span with an event type and role-labeled argument spans.

    Arguments are stored in a canonical order (by span, then role) and the
    same (role, span) pair may appear at most once.
    """

    trigger: Span
    event_type: str
    arguments: tuple[tuple[str, Span], ...] = ()

    def __post_init__(self):
        args = tuple(sorted(self.arguments, key=lambda a: (a[1].start, a[1].end, a[0])))
        if len(set(args)) != len(args):
            dupes = [a for a in args if args.count(a) > 1]
            role, span = dupes[0]
            raise DuplicateAnnotationError(
                f"argument ({role!r}, [{span.start}, {span.end})) appears twice "
                f"in a {self.event_type!r} mention"
            )
        object.__setattr__(self, "arguments", args)
        if not self.event_type:
            raise ValueError("event type must be non-empty")


@dataclass(frozen=True)
class Node:
    """A graph node: the top node has no anchors, every other node has
    at least one anchor span (canonically merged and sorted)."""

    id: int
    anchors: tuple[Span, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    label: str


@dataclass(frozen=True)
class EventGraph:
    sentence_id: str
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    top: int = TOP_ID

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def node(self, node_id: int) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def trigger_ids(self) -> tuple[int, ...]:
        return tuple(e.target for e in self.edges if e.source == self.top)


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of validate_graph: ok, or the first violated invariant."""

    ok: bool
    message: str | None = None

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def failure(cls, message: str) -> "ValidationResult":
        return cls(False, message)


_OK = ValidationResult(True)


def _check_bounds(span: Span, sentence: Sentence, what: str) -> None:
    if span.end > len(sentence):
        raise SpanBoundsError(
            f"{what} [{span.start}, {span.end}) exceeds sentence "
            f"{sentence.id!r} of length {len(sentence)}"
        )


def encode_graph(sentence: Sentence, mentions: list[EventMention]) -> EventGraph:
    """Encode event mentions as a labeled-edge event graph.

    Node ids are assigned deterministically: top is 0, trigger nodes follow
    in mention order, then argument nodes in first-occurrence order.

    Raises SpanBoundsError for out-of-bounds spans and
    DuplicateAnnotationError when two mentions describe the same event
    (identical event type and trigger span).
    """
    seen_triggers: set[tuple[str, Span]] = set()
    for m in mentions:
        _check_bounds(m.trigger, sentence, f"{m.event_type!r} trigger span")
        for role, span in m.arguments:
            _check_bounds(span, sentence, f"{role!r} argument span")
        key = (m.event_type, m.trigger)
        if key in seen_triggers:
            raise DuplicateAnnotationError(
                f"duplicate {m.event_type!r} mention with trigger "
                f"[{m.trigger.start}, {m.trigger.end}) in sentence {sentence.id!r}"
            )
        seen_triggers.add(key)

    nodes = [Node(TOP_ID)]
    edges: list[Edge] = []
    trigger_node_of = {}
    next_id = 1
    for i, m in enumerate(mentions):
        trigger_node_of[i] = next_id
        nodes.append(Node(next_id, (m.trigger,)))
        edges.append(Edge(TOP_ID, next_id, m.event_type))
        next_id += 1

    arg_node_of: dict[Span, int] = {}
    for i, m in enumerate(mentions):
        for role, span in m.arguments:
            if span not in arg_node_of:
                arg_node_of[span] = next_id
                nodes.append(Node(next_id, (span,)))
                next_id += 1
            edges.append(Edge(trigger_node_of[i], arg_node_of[span], role))

    return EventGraph(sentence.id, tuple(nodes), tuple(edges))


def decode_graph(graph: EventGraph, sentence: Sentence) -> list[EventMention]:
    """Recover the event mentions encoded by a valid event graph.

    Inverse of encode_graph: mentions come back in trigger-node id order,
    and an argument node shared by several triggers is duplicated into each
    mention with its own role label.
    """
    result = validate_graph(graph, sentence)
    if not result:
        raise GraphValidationError(result.message)

    def single_span(node: Node) -> Span:
        if len(node.anchors) != 1:
            raise GraphDecodeError(
                f"node {node.id} has a multi-span anchor and cannot be "
                "expressed as an event mention span"
            )
        return node.anchors[0]

    by_id = {n.id: n for n in graph.nodes}
    outgoing: dict[int, list[Edge]] = {}
    for e in graph.edges:
        outgoing.setdefault(e.source, []).append(e)

    mentions = []
    for top_edge in sorted(outgoing.get(graph.top, []), key=lambda e: e.target):
        trigger_node = by_id[top_edge.target]
        args = [
            (e.label, single_span(by_id[e.target]))
            for e in outgoing.get(trigger_node.id, [])
        ]
        mentions.append(
            EventMention(single_span(trigger_node), top_edge.label, tuple(args))
        )
    return mentions


def _anchors_canonical(anchors: tuple[Span, ...]) -> bool:
    """Anchors must be sorted by start, non-overlapping, and maximal
    (adjacent spans would have been merged)."""
    for prev, cur in zip(anchors, anchors[1:]):
        if cur.start <= prev.end:
            return False
    return True


def validate_graph(graph: EventGraph, sentence: Sentence | None = None) -> ValidationResult:
    """Check every structural invariant; never raises.

    Returns ok, or the first violation found, naming the offending node or
    edge.  Anchor bounds are only checked when a sentence is supplied.
    """
    ids = [n.id for n in graph.nodes]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        return ValidationResult.failure(f"duplicate node id {dup}")
    by_id = {n.id: n for n in graph.nodes}
    if graph.top not in by_id:
        return ValidationResult.failure(f"top node {graph.top} is not in the graph")

    top = by_id[graph.top]
    if top.anchors:
        return ValidationResult.failure(
            f"top must be a dummy node, but node {top.id} has anchors"
        )

    for n in graph.nodes:
        if n.id == graph.top:
            continue
        if not n.anchors:
            return ValidationResult.failure(f"node {n.id} has an empty anchor")
        if not _anchors_canonical(n.anchors):
            return ValidationResult.failure(
                f"node {n.id} anchors are not merged maximal spans sorted by start"
            )
        if sentence is not None:
            for span in n.anchors:
                if span.end > len(sentence):
                    return ValidationResult.failure(
                        f"node {n.id} anchor [{span.start}, {span.end}) exceeds "
                        f"sentence length {len(sentence)}"
                    )

    seen_edges: set[tuple[int, int, str]] = set()
    for e in graph.edges:
        if e.source not in by_id or e.target not in by_id:
            return ValidationResult.failure(
                f"edge {e.source}->{e.target} references a missing node"
            )
        if e.source == e.target:
            return ValidationResult.failure(f"edge {e.source}->{e.target} is a self-loop")
        if not e.label:
            return ValidationResult.failure(
                f"edge {e.source}->{e.target} has an empty label"
            )
        if e.target == graph.top:
            return ValidationResult.failure(
                f"edge {e.source}->{e.target} points at the top node"
            )
        key = (e.source, e.target, e.label)
        if key in seen_edges:
            return ValidationResult.failure(
                f"duplicate edge {e.source}->{e.target} with label {e.label!r}"
            )
        seen_edges.add(key)

    triggers = set(graph.trigger_ids)
    top_edges_by_target: dict[int, list[Edge]] = {}
    for e in graph.edges:
        if e.source == graph.top:
            top_edges_by_target.setdefault(e.target, []).append(e)
    for target, tes in top_edges_by_target.items():
        if len(tes) > 1:
            return ValidationResult.failure(
                f"trigger node {target} has {len(tes)} incoming top edges; "
                "one event type per trigger node"
            )

    incoming_from_trigger: dict[int, int] = {}
    for e in graph.edges:
        if e.source == graph.top:
            continue
        if e.source not in triggers:
            return ValidationResult.failure(
                f"edge {e.source}->{e.target}: source is not top or a trigger"
            )
        if e.target in triggers:
            return ValidationResult.failure(
                f"edge {e.source}->{e.target}: a trigger's edge must target "
                "an argument node"
            )
        incoming_from_trigger[e.target] = incoming_from_trigger.get(e.target, 0) + 1

    argument_ids = [
        n.id for n in graph.nodes if n.id != graph.top and n.id not in triggers
    ]
    for nid in argument_ids:
        if incoming_from_trigger.get(nid, 0) == 0:
            return ValidationResult.failure(
                f"argument node {nid} is attached to no trigger"
            )

    seen_arg_anchors: dict[tuple[Span, ...], int] = {}
    for nid in argument_ids:
        anchors = by_id[nid].anchors
        if anchors in seen_arg_anchors:
            return ValidationResult.failure(
                f"argument nodes {seen_arg_anchors[anchors]} and {nid} share "
                "identical anchors; shared arguments must be one node"
            )
        seen_arg_anchors[anchors] = nid

    seen_trigger_keys: dict[tuple[tuple[Span, ...], str], int] = {}
    for tid in triggers:
        label = top_edges_by_target[tid][0].label
        key = (by_id[tid].anchors, label)
        if key in seen_trigger_keys:
            return ValidationResult.failure(
                f"trigger nodes {seen_trigger_keys[key]} and {tid} share the "
                f"same anchor and event type {label!r}"
            )
        seen_trigger_keys[key] = tid

    return _OK
