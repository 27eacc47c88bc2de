"""
Span-based scoring: strict and relaxed argument matching
========================================================

Scores are computed by optimal one-to-one matching between predicted
and gold items, so duplicated predictions never earn double credit.
Arguments can be scored with exact spans ("perfect") or with an 80%
overlap relaxation that only applies to gold spans longer than five
tokens.
"""

from evgraph import (
    Corpus,
    EventMention,
    Sentence,
    Span,
    format_report,
    score_all,
    score_arguments,
)

tokens = ("Union", "leaders", "announced", "a", "strike", "across",
          "three", "northern", "rail", "depots", "on", "Monday", ".")
sentence = Sentence("d3", tokens)

gold = Corpus.from_entries([(sentence, (
    EventMention(Span(2, 3), "Announce", (("Agent", Span(0, 2)),)),
    EventMention(Span(4, 5), "Strike",
                 (("Place", Span(5, 10)), ("Time", Span(10, 12)))),
))])

# the predicted Place span misses one token of a five token gold span;
# the Time span is exact and the Announce agent is exact
pred = Corpus.from_entries([(Sentence("d3", tokens), (
    EventMention(Span(2, 3), "Announce", (("Agent", Span(0, 2)),)),
    EventMention(Span(4, 5), "Strike",
                 (("Place", Span(5, 9)), ("Time", Span(10, 12)))),
))])

print(format_report(score_all(pred, gold)))

# gold spans of five tokens or fewer always need exact boundaries, so
# the 4/5 Place overlap earns nothing even in relaxed mode
for mode in ("perfect", "overlap80"):
    prf = score_arguments(pred, gold, mode)
    print(f"{mode:>10}: P={prf.precision:.2f} R={prf.recall:.2f} "
          f"F1={prf.f1:.2f} (tp={prf.tp})")

# a six token gold span is where the relaxation starts to matter
gold_wide = Corpus.from_entries([(sentence, (
    EventMention(Span(2, 3), "Announce", (("Scope", Span(4, 10)),)),
))])
pred_wide = Corpus.from_entries([(Sentence("d3", tokens), (
    EventMention(Span(2, 3), "Announce", (("Scope", Span(5, 10)),)),
))])
strict = score_arguments(pred_wide, gold_wide, "perfect").tp
relaxed = score_arguments(pred_wide, gold_wide, "overlap80").tp
print(f"6-token gold, 5 overlapping: perfect tp={strict}, overlap80 tp={relaxed}")
