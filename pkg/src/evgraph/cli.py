"""Command-line interface.

One executable with subcommands: convert, validate, stats, gen-synthetic,
train, predict, evaluate.  Exit codes: 0 success, 1 validation/data
failure, 2 usage error.  Machine-readable output via --json where it
applies; EVGRAPH_THREADS caps evaluation parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import corpus as cio
from .errors import EvgraphError
from .graphs import decode_graph, encode_graph, validate_graph
from .model import ModelConfig
from .scoring import format_report, score_all
from .training import (
    TrainConfig,
    default_workers,
    evaluate_model,
    load_parser,
    predict_corpus,
    train,
)

_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


class _UsageError(Exception):
    pass


def _parse_override(raw: str) -> tuple[str, object]:
    if "=" not in raw:
        raise _UsageError(f"override {raw!r} is not of the form key=value")
    key, text = raw.split("=", 1)
    key = key.strip()
    if key not in _MODEL_KEYS | _TRAIN_KEYS:
        raise _UsageError(f"unknown config key {key!r}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key, value


def _load_config(args) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            cfg = json.load(f)
        unknown = set(cfg) - (_MODEL_KEYS | _TRAIN_KEYS)
        if unknown:
            raise _UsageError(f"unknown config keys: {sorted(unknown)}")
    for raw in getattr(args, "set", None) or []:
        key, value = _parse_override(raw)
        cfg[key] = value
    return cfg


def _split_config(cfg: dict, corpus: cio.Corpus,
                  embeddings) -> tuple[ModelConfig, TrainConfig]:
    model_d = {k: v for k, v in cfg.items() if k in _MODEL_KEYS}
    train_d = {k: v for k, v in cfg.items() if k in _TRAIN_KEYS}
    model_d.setdefault("event_types", list(corpus.ontology.event_types))
    model_d.setdefault("roles", list(corpus.ontology.roles))
    if model_d.get("encoder") == "external" and not model_d.get("external_dim"):
        if embeddings:
            first = next(iter(embeddings.values()))
            model_d["external_dim"] = int(first.shape[1])
    return ModelConfig.from_dict(model_d), TrainConfig.from_dict(train_d)


# -- subcommand implementations ---------------------------------------------


def _cmd_convert(args) -> int:
    fmt = cio.infer_format(args.input)
    target = args.to or ("graph" if fmt == "mentions" else "mentions")
    if target == "graph":
        if fmt != "mentions":
            raise _UsageError("--to=graph requires a mention-format input")
        corpus = cio.read_corpus(args.input)
        graphs = [encode_graph(s, list(ms)) for s, ms in corpus]
        cio.write_graphs(graphs, args.output)
    else:
        if fmt != "graphs":
            raise _UsageError("--to=mentions requires a graph-format input")
        if not args.sentences:
            raise _UsageError("--to=mentions requires --sentences for the tokens")
        graphs = cio.read_graphs(args.input)
        tokens = cio.read_corpus(args.sentences)
        by_id = {s.id: s for s, _ in tokens}
        entries = []
        for g in graphs:
            if g.sentence_id not in by_id:
                raise EvgraphError(
                    f"graph {g.sentence_id!r} has no sentence in {args.sentences}"
                )
            sent = by_id[g.sentence_id]
            entries.append((sent, tuple(decode_graph(g, sent))))
        cio.write_corpus(cio.Corpus.from_entries(entries), args.output)
    return 0


def _cmd_validate(args) -> int:
    fmt = cio.infer_format(args.input)
    if fmt == "mentions":
        corpus = cio.read_corpus(args.input)
        n = len(corpus)
    else:
        graphs = cio.read_graphs(args.input)
        if args.sentences:
            by_id = {s.id: s for s, _ in cio.read_corpus(args.sentences)}
            for g in graphs:
                sent = by_id.get(g.sentence_id)
                result = validate_graph(g, sent)
                if not result:
                    raise EvgraphError(f"graph {g.sentence_id!r}: {result.message}")
        n = len(graphs)
    if args.json:
        print(json.dumps({"ok": True, "format": fmt, "records": n}))
    else:
        print(f"OK: {n} {fmt} record(s)")
    return 0


def _cmd_stats(args) -> int:
    corpus = cio.read_corpus(args.input)
    stats = cio.compute_stats(corpus)
    print(json.dumps(stats.to_dict(), sort_keys=True) if args.json
          else stats.format())
    return 0


def _cmd_gen_synthetic(args) -> int:
    corpus = cio.gen_synthetic(args.seed, args.n_sentences,
                               (args.event_types, args.roles))
    cio.write_corpus(corpus, args.output)
    if args.json:
        print(json.dumps({"written": len(corpus), "path": args.output}))
    else:
        print(f"wrote {len(corpus)} sentence(s) to {args.output}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.checkpoint_dir:
        cfg["checkpoint_dir"] = args.checkpoint_dir
    train_corpus = cio.read_corpus(args.train)
    dev_corpus = cio.read_corpus(args.dev) if args.dev else None
    embeddings = cio.read_embeddings(args.embeddings) if args.embeddings else None
    model_config, train_config = _split_config(cfg, train_corpus, embeddings)
    if not train_config.checkpoint_dir:
        raise _UsageError("train requires --checkpoint-dir (or checkpoint_dir in config)")
    result = train(train_corpus, dev_corpus, model_config, train_config, embeddings)
    summary = {
        "best_epoch": result.best_epoch,
        "best_checkpoint": result.best_checkpoint,
        "last_checkpoint": result.last_checkpoint,
        "skipped_sentences": list(result.skipped_sentences),
        "final_loss": result.history[-1]["loss_terms"]["total"],
    }
    if result.history and "dev" in result.history[-1]:
        summary["dev"] = result.history[-1]["dev"]
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"best epoch {result.best_epoch}; "
              f"checkpoint {result.best_checkpoint}")
    return 0


def _cmd_predict(args) -> int:
    parser, _ = load_parser(args.model)
    corpus = cio.read_corpus(args.input)
    embeddings = cio.read_embeddings(args.embeddings) if args.embeddings else None
    pred = predict_corpus(parser, corpus, embeddings,
                          max_workers=default_workers())
    cio.write_corpus(pred, args.output)
    if args.json:
        print(json.dumps({"written": len(pred), "path": args.output}))
    return 0


def _cmd_evaluate(args) -> int:
    gold = cio.read_corpus(args.gold)
    if args.model:
        embeddings = cio.read_embeddings(args.embeddings) if args.embeddings else None
        report = evaluate_model(args.model, gold, embeddings)
    else:
        if not args.pred:
            raise _UsageError("evaluate requires --pred or --model")
        pred = cio.read_corpus(args.pred)
        report = score_all(pred, gold, max_workers=default_workers())
    print(report.to_json() if args.json else format_report(report))
    return 0


# -- argument wiring ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="evgraph",
        description="Event extraction as graph parsing: corpus tools, "
                    "training, and evaluation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="convert between mention and graph files")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--to", choices=("graph", "mentions"))
    c.add_argument("--sentences", help="mention file supplying tokens "
                                       "(required for --to=mentions)")
    c.set_defaults(func=_cmd_convert)

    v = sub.add_parser("validate", help="validate a mention or graph file")
    v.add_argument("input")
    v.add_argument("--sentences", help="mention file for bounds checking graphs")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("stats", help="corpus statistics")
    s.add_argument("input")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_stats)

    g = sub.add_parser("gen-synthetic", help="generate a synthetic corpus")
    g.add_argument("output")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--n-sentences", type=int, required=True)
    g.add_argument("--event-types", type=int, default=5)
    g.add_argument("--roles", type=int, default=6)
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=_cmd_gen_synthetic)

    t = sub.add_parser("train", help="train a parser")
    t.add_argument("--train", required=True)
    t.add_argument("--dev")
    t.add_argument("--config", help="JSON file with model/train config keys")
    t.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="config override (repeatable; wins over --config)")
    t.add_argument("--seed", type=int)
    t.add_argument("--checkpoint-dir")
    t.add_argument("--embeddings", help="external embedding file")
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="predict mentions with a checkpoint")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output", required=True)
    pr.add_argument("--embeddings")
    pr.add_argument("--json", action="store_true")
    pr.set_defaults(func=_cmd_predict)

    e = sub.add_parser("evaluate", help="score predictions against gold")
    e.add_argument("--pred")
    e.add_argument("--gold", required=True)
    e.add_argument("--model", help="score a checkpoint instead of a file")
    e.add_argument("--embeddings")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=_cmd_evaluate)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (EvgraphError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main(sys.argv[1:]))
