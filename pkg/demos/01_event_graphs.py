"""
Event mentions as labeled-edge graphs
=====================================

A sentence's event annotations become one graph: a virtual top node
points at trigger nodes (edge label = event type), and trigger nodes
point at argument nodes (edge label = role).  Nodes themselves carry
only token anchors, so an argument shared by two events is a single
node with two incoming edges.
"""

from evgraph import EventMention, Sentence, Span, decode_graph, encode_graph

# a sentence with two events that share an argument
sentence = Sentence(
    "demo-1",
    "Flood waters forced the village council to evacuate residents .".split(),
)
force = EventMention(
    trigger=Span(2, 3),  # "forced"
    event_type="Compel",
    arguments=(("Agent", Span(0, 2)), ("Patient", Span(3, 6))),
)
evacuate = EventMention(
    trigger=Span(7, 8),  # "evacuate"
    event_type="Relocate",
    arguments=(("Agent", Span(3, 6)), ("Theme", Span(8, 9))),
)

# encode: mentions -> graph
graph = encode_graph(sentence, [force, evacuate])
print(f"{len(graph.nodes)} nodes (1 top, 2 triggers, 3 arguments)")
for node in graph.nodes:
    anchors = " ".join(f"{s.start}:{s.end}" for s in node.anchors) or "-"
    print(f"  node {node.id}: anchors {anchors}")

# "the village council" appears once even though both events use it
for edge in graph.edges:
    print(f"  edge {edge.source} -> {edge.target} [{edge.label}]")

# decode: graph -> mentions, shared arguments duplicated back out
recovered = decode_graph(graph, sentence)
print("round-trip identical:", sorted(recovered, key=repr)
      == sorted([force, evacuate], key=repr))
