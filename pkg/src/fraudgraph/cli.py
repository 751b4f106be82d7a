"""Command-line entry points: gen / ingest / train / bench / score / explain /
serve. Every subcommand takes --seed and reads/writes the documented file
formats (CSV transaction logs, JSONL graphs, binary checkpoints, JSON
reports and explanations)."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import datagen
from .baselines import BaselineConfig, run_experiment
from .explain import (ExplainerConfig, explanation_to_dot, export_explanation,
                      extract_subgraph, optimize_masks)
from .graph import (GraphError, build_graph, filter_low_degree,
                    read_graph_jsonl, read_log, write_graph_jsonl, write_log)
from .model import (PredictorConfig, full_config, load_checkpoint, predict,
                    save_checkpoint)
from .sampling import chronological_split
from .training import train_predictor

DEFAULT_MIN_TXN_COUNT = 2


def _load_graph(args, extras: dict | None = None):
    """Graph from --graph (jsonl, already filtered) or --log (csv, filtered
    here with --min-txn-count / the checkpoint's recorded threshold)."""
    if getattr(args, "graph", None):
        return read_graph_jsonl(args.graph)
    records = read_log(args.log)
    g = build_graph(records)
    k = args.min_txn_count
    if k is None and extras:
        k = extras.get("min_txn_count")
    if k is None:
        k = DEFAULT_MIN_TXN_COUNT
    return filter_low_degree(g, int(k)) if int(k) > 1 else g


def _add_graph_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--log", help="transaction-log CSV")
    src.add_argument("--graph", help="graph JSONL container")
    p.add_argument("--min-txn-count", type=int, default=None,
                   help="entity degree threshold applied when building from a log")


def cmd_gen(args) -> int:
    cfg = datagen.GenConfig(
        n_txn=args.n_txn, fraud_rate=args.fraud_rate, n_features=args.n_features,
        ring_size=args.ring_size, seed=args.seed)
    if args.preset == "topology-only":
        cfg = datagen.topology_only(cfg)
    records, gt = datagen.generate(cfg)
    write_log(records, args.output)
    if args.ground_truth:
        gt.save_json(args.ground_truth)
    print(f"wrote {len(records)} records to {args.output}")
    return 0


def cmd_ingest(args) -> int:
    g = _load_graph(args)
    write_graph_jsonl(g, args.output)
    print(f"wrote graph with {g.num_nodes} nodes / {g.num_edges} edges to {args.output}")
    return 0


def _predictor_config(args) -> PredictorConfig:
    base = full_config() if args.config == "full" else PredictorConfig()
    overrides = {"seed": args.seed}
    for name, flag in (("n_hid", "n_hid"), ("n_layers", "layers"),
                       ("n_heads", "heads"), ("max_epochs", "epochs"),
                       ("n_batch", "batch"), ("patience", "patience")):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    return dataclasses.replace(base, **overrides)


def cmd_train(args) -> int:
    g = _load_graph(args)
    split = chronological_split(g)
    cfg = _predictor_config(args)
    result = train_predictor(g, split, cfg)
    extras = {"min_txn_count": args.min_txn_count if args.min_txn_count is not None
              else DEFAULT_MIN_TXN_COUNT}
    save_checkpoint(result.params, args.output, extras=extras)

    def no_nan(x):
        return None if x != x else x

    if args.history:
        epochs = [dataclasses.asdict(e) for e in result.log]
        for e in epochs:
            e["val_auc"] = no_nan(e["val_auc"])
        with open(args.history, "w") as fh:
            json.dump({"v": 1, "best_epoch": result.best_epoch,
                       "best_val_auc": no_nan(result.best_val_auc),
                       "epochs": epochs}, fh, indent=2)
    shown = ("n/a" if result.best_val_auc != result.best_val_auc
             else f"{result.best_val_auc:.4f}")
    print(f"trained {cfg.n_layers}-layer model (best val AUC {shown} at epoch "
          f"{result.best_epoch}); checkpoint -> {args.output}")
    return 0


def cmd_bench(args) -> int:
    g = _load_graph(args)
    split = chronological_split(g)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    seeds = tuple(range(args.seed, args.seed + args.n_seeds))
    pc = dataclasses.replace(
        full_config() if args.config == "full" else PredictorConfig(),
        max_epochs=args.epochs if args.epochs is not None
        else (128 if args.config == "full" else PredictorConfig().max_epochs))
    bc = BaselineConfig(max_epochs=pc.max_epochs, patience=pc.patience)
    report = run_experiment(models, g, split, seeds=seeds, predictor_config=pc,
                            baseline_config=bc, dataset_name=args.log or args.graph)
    report.save_json(args.output)
    table = report.render_table()
    if args.table:
        Path(args.table).write_text(table + "\n")
    print(table)
    return 0


def cmd_score(args) -> int:
    params, extras = load_checkpoint(args.ckpt)
    g = _load_graph(args, extras)
    ids = [g.id_of(t) for t in args.txn]
    for t in ids:
        if not g.is_txn(t):
            raise GraphError(f"{g.key_of(t)!r} is not a transaction")
    out = [dataclasses.asdict(r) for r in predict(g, params, ids)]
    text = json.dumps({"v": 1, "scores": out}, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def cmd_explain(args) -> int:
    params, extras = load_checkpoint(args.ckpt)
    g = _load_graph(args, extras)
    target = g.id_of(args.txn)
    sub = extract_subgraph(g, target, params.config.n_layers)
    cfg = ExplainerConfig(epochs=args.epochs, seed=args.seed)
    masks = optimize_masks(sub, params, target, cfg)
    exp = export_explanation(masks, sub, args.threshold)
    exp.save_json(args.output)
    if args.dot:
        Path(args.dot).write_text(explanation_to_dot(exp) + "\n")
    print(f"explained {args.txn}: {len(exp.edges)} edges >= {args.threshold} "
          f"(of {sub.num_edges}); final loss {masks.loss_trace[-1]:.4f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app, create_state

    ckpt = args.ckpt or os.environ.get("CHECKPOINT")
    graph = args.graph or args.log or os.environ.get("GRAPH")
    if not ckpt or not graph:
        print("serve needs --ckpt/--graph (or CHECKPOINT/GRAPH env vars)",
              file=sys.stderr)
        return 1
    state = create_state(graph, ckpt, args.min_txn_count)
    app = build_app(state)
    port = args.port or int(os.environ.get("PORT", "8333"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraudgraph",
        description="heterogeneous-graph fraud scoring and explanation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic transaction log")
    p.add_argument("--n-txn", type=int, default=10_000)
    p.add_argument("--fraud-rate", type=float, default=0.043)
    p.add_argument("--n-features", type=int, default=16)
    p.add_argument("--ring-size", type=int, default=8)
    p.add_argument("--preset", choices=["default", "topology-only"], default="default")
    p.add_argument("--ground-truth", help="also write pattern ground truth JSON")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="build and persist the typed graph")
    _add_graph_source(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the predictor")
    _add_graph_source(p)
    p.add_argument("--config", choices=["desk", "full"], default="desk")
    p.add_argument("--n-hid", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--history", help="write the per-epoch training log JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="multi-seed AUC comparison of models")
    _add_graph_source(p)
    p.add_argument("--models", default="het_gnn,gcn,dnn,lr")
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--config", choices=["desk", "full"], default="desk")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--table", help="also write the text table to a file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("score", help="score transactions with a checkpoint")
    _add_graph_source(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--txn", action="append", required=True,
                   help="txn id (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", help="optimize masks and export an explanation")
    _add_graph_source(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--txn", required=True)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--dot", help="also write a Graphviz DOT file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--log")
    p.add_argument("--graph")
    p.add_argument("--ckpt")
    p.add_argument("--min-txn-count", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, datagen.GenError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
