"""
Swapping the toy encoder for precomputed embeddings
===================================================

The parser normally learns its own token embeddings.  When contextual
vectors from a real language model are available, store them in an
embedding file keyed by sentence id and switch the encoder to
"external": the vectors are projected to d_model and the decoder stack
runs unchanged.
"""

import pathlib
import tempfile

import numpy as np

from evgraph import (
    ModelConfig,
    TrainConfig,
    gen_synthetic,
    read_embeddings,
    score_all,
    train,
    write_embeddings,
)
from evgraph.training import predict_corpus

corpus = gen_synthetic(seed=9, n_sentences=12, ontology_size=(2, 2))

# stand-in "contextual" vectors: one deterministic 24-dim vector per
# token type, plus a position tag.  A real pipeline would dump these
# from a pretrained encoder instead.
dim = 24
rng = np.random.default_rng(0)
lexicon: dict[str, np.ndarray] = {}
table = {}
for sentence, _ in corpus:
    rows = []
    for pos, token in enumerate(sentence.tokens):
        if token not in lexicon:
            lexicon[token] = rng.standard_normal(dim).astype(np.float32)
        vec = lexicon[token].copy()
        vec[-1] = pos / 10.0
        rows.append(vec)
    table[sentence.id] = np.stack(rows)

tmp = pathlib.Path(tempfile.mkdtemp())
write_embeddings(table, tmp / "vectors.evgemb")
loaded = read_embeddings(tmp / "vectors.evgemb")
print(f"{len(loaded)} sentences of {dim}-dim vectors round-tripped")

model_config = ModelConfig(
    event_types=corpus.ontology.event_types,
    roles=corpus.ontology.roles,
    encoder="external",
    external_dim=dim,
    d_model=16,
    n_heads=2,
    n_encoder_layers=0,  # the vectors already carry context
    n_decoder_layers=1,
    hidden_size_anchor=16,
    hidden_size_edge_presence=16,
    hidden_size_edge_label=16,
    dropout_transformer=0.0,
    dropout_attention=0.0,
)
# frozen-backbone convention: tiny encoder-side lr (here it only trains
# the projection), ordinary decoder lr
train_config = TrainConfig(
    batch_size=4,
    epochs=150,
    encoder_lr=1e-3,
    decoder_lr=4e-3,
    warmup_steps=30,
    seed=4,
    eval_every=150,
)

result = train(corpus, None, model_config, train_config, embeddings=loaded)
report = score_all(
    predict_corpus(result.parser, corpus, embeddings=loaded), corpus)
print(f"final loss {result.history[-1]['loss_terms']['total']:.4f}")
print(f"train-set Trg-C F1 {report.trg_c.f1:.3f}, "
      f"Arg-C F1 {report.arg_c_perfect.f1:.3f}")
