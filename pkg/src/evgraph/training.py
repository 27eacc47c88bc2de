"""Deterministic training loop, evaluation, and batch prediction.

Training is bit-reproducible for a fixed (seed, config, corpus): batch
order is a pure function of (seed, epoch), dropout masks are keyed by
(seed, step, slot, site), and all compute is single-threaded float32.
Parameters split into two optimizer groups — encoder versus everything
else — with separate learning rates and weight decays.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Ontology
from .errors import CapacityError, VocabularyMismatchError
from .graphs import encode_graph
from .model import EventParser, ModelConfig, match_targets, training_loss
from .nn import tensor as T
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.optim import AdamW, lr_at_step
from .scoring import ScoreReport, score_all

__all__ = [
    "TrainConfig",
    "TrainResult",
    "train",
    "evaluate_model",
    "predict_corpus",
    "load_parser",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 180
    encoder_lr: float | None = None  # None: 1e-4 for toy, 4e-6 for external
    decoder_lr: float = 1.0e-4
    encoder_weight_decay: float = 0.1
    decoder_weight_decay: float = 1.2e-6
    warmup_steps: int = 1000
    seed: int = 1
    eval_every: int = 10
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def resolved_encoder_lr(self, model_config: ModelConfig) -> float:
        if self.encoder_lr is not None:
            return self.encoder_lr
        return 1.0e-4 if model_config.encoder == "toy" else 4.0e-6

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "encoder_lr": self.encoder_lr,
            "decoder_lr": self.decoder_lr,
            "encoder_weight_decay": self.encoder_weight_decay,
            "decoder_weight_decay": self.decoder_weight_decay,
            "warmup_steps": self.warmup_steps,
            "seed": self.seed,
            "eval_every": self.eval_every,
            "checkpoint_dir": self.checkpoint_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainResult:
    parser: EventParser
    history: list[dict]
    lr_trace: list[dict]
    best_epoch: int
    skipped_sentences: tuple[str, ...]
    best_checkpoint: str | None
    last_checkpoint: str | None


def _check_vocabulary(model_config: ModelConfig, ontology: Ontology,
                      what: str) -> None:
    bad_types = [t for t in ontology.event_types if t not in model_config.event_types]
    bad_roles = [r for r in ontology.roles if r not in model_config.roles]
    if bad_types or bad_roles:
        raise VocabularyMismatchError(
            f"{what} uses labels outside the model vocabulary: "
            f"event types {bad_types}, roles {bad_roles}"
        )


def _prepare_items(corpus: Corpus, model_config: ModelConfig):
    """Pair each sentence with its gold graph; split off over-capacity ones."""
    usable, skipped = [], []
    for sentence, mentions in corpus:
        graph = encode_graph(sentence, list(mentions))
        n_nodes = len(graph.nodes) - 1
        if n_nodes > len(sentence) * model_config.n_queries_per_token:
            skipped.append(sentence.id)
        else:
            usable.append((sentence, graph))
    return usable, skipped


def train(train_corpus: Corpus, dev_corpus: Corpus | None,
          model_config: ModelConfig, train_config: TrainConfig,
          embeddings: dict[str, np.ndarray] | None = None) -> TrainResult:
    """Train a parser; returns the best-on-dev parser plus run records."""
    if len(train_corpus) == 0:
        raise ValueError("training corpus is empty")
    _check_vocabulary(model_config, train_corpus.ontology, "training corpus")
    if dev_corpus is not None:
        _check_vocabulary(model_config, dev_corpus.ontology, "dev corpus")

    items, skipped = _prepare_items(train_corpus, model_config)
    if skipped:
        log.warning("skipping %d over-capacity sentence(s): %s",
                    len(skipped), ", ".join(skipped[:5]))
    if not items:
        raise CapacityError("no trainable sentences after capacity filtering")

    cfg = train_config
    n_batches = (len(items) + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * n_batches
    if cfg.warmup_steps >= total_steps:
        raise ValueError(
            f"warmup_steps {cfg.warmup_steps} must be < total steps {total_steps}"
        )

    parser = EventParser.build(model_config, seed=cfg.seed)
    label_index = {lab: i for i, lab in enumerate(model_config.edge_labels)}
    groups = parser.parameter_groups()
    peaks = {
        "encoder": cfg.resolved_encoder_lr(model_config),
        "decoder": cfg.decoder_lr,
    }
    decays = {
        "encoder": cfg.encoder_weight_decay,
        "decoder": cfg.decoder_weight_decay,
    }
    for g in groups:
        g["peak_lr"] = peaks[g["name"]]
        g["weight_decay"] = decays[g["name"]]
    groups = [g for g in groups if g["params"]]
    opt = AdamW(groups)

    history: list[dict] = []
    lr_trace: list[dict] = []
    best_key = None
    best_state: dict[str, np.ndarray] | None = None
    best_epoch = 0
    step = 0

    for epoch in range(1, cfg.epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(items))
        epoch_terms = {"node": 0.0, "anchor": 0.0, "edge_presence": 0.0,
                       "edge_label": 0.0, "total": 0.0}
        for b in range(n_batches):
            batch_idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            opt.zero_grad()
            inv_b = 1.0 / len(batch_idx)
            for slot, idx in enumerate(batch_idx):
                sentence, graph = items[int(idx)]
                drop = parser.make_dropout(cfg.seed, step, slot)
                output = parser.forward(sentence, drop=drop, embeddings=embeddings)
                assignment = match_targets(output, graph)
                loss, terms = training_loss(output, graph, assignment,
                                            edge_label_index=label_index)
                T.backward(loss, grad=np.float32(inv_b))
                for k in epoch_terms:
                    epoch_terms[k] += terms.get(k, 0.0)
            for _, p in opt.param_tensors():
                # a batch of event-free sentences touches no edge/anchor head
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
            lrs = {g["name"]: lr_at_step(step, cfg.warmup_steps, total_steps,
                                         g["peak_lr"]) for g in groups}
            opt.step(lrs)
            lr_trace.append({"step": step, **lrs})
            step += 1

        entry = {
            "epoch": epoch,
            "loss_terms": {k: v / len(items) for k, v in epoch_terms.items()},
        }
        is_eval = dev_corpus is not None and len(dev_corpus) > 0 and (
            epoch % cfg.eval_every == 0 or epoch == cfg.epochs
        )
        if is_eval:
            report = _score_parser(parser, dev_corpus, embeddings)
            entry["dev"] = report.to_dict()
            key = (report.arg_c_perfect.f1, report.trg_c.f1, -epoch)
            if best_key is None or key > best_key:
                best_key = key
                best_epoch = epoch
                best_state = {n: t.data.copy() for n, t in parser.store.items()}
        history.append(entry)

    if best_state is None:
        best_epoch = cfg.epochs
        best_state = {n: t.data.copy() for n, t in parser.store.items()}

    best_path = last_path = None
    if cfg.checkpoint_dir:
        out = Path(cfg.checkpoint_dir)
        out.mkdir(parents=True, exist_ok=True)
        last_path = str(out / "last.evg")
        save_checkpoint(last_path, parser.store.state_arrays(),
                        model_config.to_dict(), cfg.to_dict(), step)
        parser.store.load_state(best_state)
        best_path = str(out / "best.evg")
        save_checkpoint(best_path, parser.store.state_arrays(),
                        model_config.to_dict(), cfg.to_dict(), step)
        with open(out / "history.jsonl", "w", encoding="utf-8") as f:
            for entry in history:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        with open(out / "lr_trace.jsonl", "w", encoding="utf-8") as f:
            for entry in lr_trace:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
    else:
        parser.store.load_state(best_state)

    return TrainResult(parser, history, lr_trace, best_epoch,
                       tuple(skipped), best_path, last_path)


def default_workers() -> int:
    env = os.environ.get("EVGRAPH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def predict_corpus(parser: EventParser, corpus: Corpus,
                   embeddings: dict[str, np.ndarray] | None = None,
                   max_workers: int | None = None) -> Corpus:
    """Predict mentions for every sentence; ontology is the model's."""
    sentences = [s for s, _ in corpus]
    if max_workers is None:
        max_workers = 1
    if max_workers > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            preds = list(pool.map(
                lambda s: parser.predict_mentions(s, embeddings), sentences))
    else:
        preds = [parser.predict_mentions(s, embeddings) for s in sentences]
    ontology = Ontology(parser.config.event_types, parser.config.roles)
    return Corpus.from_entries(
        [(s, tuple(ms)) for s, ms in zip(sentences, preds)], ontology)


def _score_parser(parser: EventParser, corpus: Corpus,
                  embeddings=None, max_workers: int | None = None) -> ScoreReport:
    pred = predict_corpus(parser, corpus, embeddings, max_workers)
    return score_all(pred, corpus)


def load_parser(checkpoint_path) -> tuple[EventParser, dict]:
    """Instantiate a parser from a checkpoint; returns (parser, header)."""
    params, header = load_checkpoint(checkpoint_path)
    config = ModelConfig.from_dict(header["model_config"])
    return EventParser.from_arrays(config, params), header


def evaluate_model(checkpoint_path, corpus: Corpus,
                   embeddings: dict[str, np.ndarray] | None = None,
                   max_workers: int | None = None) -> ScoreReport:
    """Load a checkpoint, predict the corpus, and score against its gold."""
    parser, _ = load_parser(checkpoint_path)
    _check_vocabulary(parser.config, corpus.ontology, "evaluation corpus")
    if max_workers is None:
        max_workers = default_workers()
    return _score_parser(parser, corpus, embeddings, max_workers)
