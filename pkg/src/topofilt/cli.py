"""Command-line entry point.

Subcommands: generate, train, eval, export-barcodes, check-theorem,
ablate. Every run writes a manifest (config digest, seed, versions,
metrics) next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import RunConfig, parse_config
from .datasets import DatasetSpec, generate
from .graphs import partition, read_jsonl, write_jsonl
from .harness import check_theorem, evaluate, make_theorem_instances, write_manifest
from .metrics import GEOMETRIC, LITERAL
from .model import Model, forward, load_params, train
from .persistence import compute_ph, write_barcodes


def _load_splits(data_dir):
    return tuple(read_jsonl(os.path.join(data_dir, f"{name}.jsonl"))
                 for name in ("train", "val", "test"))


def _save_checkpoint(path, arrays: dict) -> None:
    np.savez(path, **arrays)


def _load_checkpoint(path) -> dict:
    with np.load(path) as z:
        return {k: z[k] for k in z.files}


def _build_model(config: RunConfig, d_in: int, n_classes: int) -> Model:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    return Model.init(rng, d_in=d_in, n_classes=n_classes, config=config)


def _dataset_spec(path) -> DatasetSpec:
    with open(path) as fh:
        raw = json.load(fh)
    return DatasetSpec(**raw)


def cmd_generate(args) -> int:
    spec = _dataset_spec(args.spec)
    splits = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    counts = {}
    for name, graphs in zip(("train", "val", "test"), splits):
        write_jsonl(os.path.join(args.out, f"{name}.jsonl"), graphs)
        counts[name] = len(graphs)
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump({"spec": vars(spec), "seed": spec.seed, "counts": counts},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {sum(counts.values())} graphs to {args.out}")
    return 0


def _train_once(config: RunConfig, splits, out_dir) -> dict:
    tr, va, te = splits
    d_in = np.asarray(tr[0].node_features).shape[1]
    n_classes = max(g.label for g in tr + va + te) + 1
    model = _build_model(config, d_in, n_classes)
    history = []

    def log(rec):
        history.append(rec)
        print(f"epoch {rec['epoch']}: train_loss {rec['train_loss']:.4f} "
              f"val_acc {rec['val_acc']:.3f} val_loss {rec['val_loss']:.4f}")

    best, _ = train(tr, va, model, config, log=log)
    load_params(model, best)
    acc, auc, _ = evaluate(model, te, warn=lambda m: print(m, file=sys.stderr))
    metrics = {"test_acc": acc, "test_auc": auc}
    os.makedirs(out_dir, exist_ok=True)
    _save_checkpoint(os.path.join(out_dir, "checkpoint.npz"), best)
    with open(os.path.join(out_dir, "history.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_acc", "val_loss"])
        w.writeheader()
        w.writerows(history)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(config.to_text())
    write_manifest(os.path.join(out_dir, "manifest.json"), config, metrics)
    return metrics


def cmd_train(args) -> int:
    config = parse_config(args.config) if args.config else RunConfig()
    splits = _load_splits(args.data)
    all_metrics = []
    for i in range(args.seeds):
        cfg = config.replace(seed=config.seed + i)
        out = args.out if args.seeds == 1 else os.path.join(args.out, f"seed{cfg.seed}")
        m = _train_once(cfg, splits, out)
        print(f"seed {cfg.seed}: test_acc {m['test_acc']:.3f} test_auc {m['test_auc']}")
        all_metrics.append(m)
    if args.seeds > 1:
        mean_acc = float(np.mean([m["test_acc"] for m in all_metrics]))
        print(f"mean test_acc over {args.seeds} seeds: {mean_acc:.3f}")
    return 0


def cmd_eval(args) -> int:
    config = parse_config(args.config) if args.config else RunConfig()
    tr, va, te = _load_splits(args.data)
    d_in = np.asarray(te[0].node_features).shape[1]
    n_classes = max(g.label for g in tr + va + te) + 1
    model = _build_model(config, d_in, n_classes)
    load_params(model, _load_checkpoint(args.checkpoint))
    acc, auc, _ = evaluate(model, te, warn=lambda m: print(m, file=sys.stderr))
    out = {"test_acc": acc, "test_auc": auc}
    print(json.dumps(out, sort_keys=True))
    if args.out:
        write_manifest(args.out, config, out)
    return 0


def cmd_export_barcodes(args) -> int:
    config = parse_config(args.config) if args.config else RunConfig()
    tr, va, te = _load_splits(args.data)
    d_in = np.asarray(te[0].node_features).shape[1]
    n_classes = max(g.label for g in tr + va + te) + 1
    model = _build_model(config, d_in, n_classes)
    load_params(model, _load_checkpoint(args.checkpoint))
    rows = []
    for i, g in enumerate(te):
        res = forward(g, model, training=False)
        part = partition(res.fg, config.threshold)
        rows.append((i, "x", compute_ph(part.x_side)))
        rows.append((i, "eps", compute_ph(part.eps_side)))
    write_barcodes(args.out, rows)
    print(f"wrote barcodes for {len(rows)} graphs to {args.out}")
    return 0


def cmd_check_theorem(args) -> int:
    config = parse_config(args.config) if args.config else RunConfig()
    instances = make_theorem_instances(args.instances, seed=config.seed)
    status = 0
    for conv in (GEOMETRIC, LITERAL):
        reps = check_theorem(instances, lambda0=args.lambda0,
                             alpha=config.alpha, convention=conv)
        ok = sum(r["unique"] and r["matches"] for r in reps)
        print(f"{conv}: unique indicator argmin in {ok}/{len(reps)} instances")
        if ok < len(reps):
            status = 1
    return status


def cmd_ablate(args) -> int:
    config = parse_config(args.config) if args.config else RunConfig()
    if args.no_topo:
        config = config.replace(alpha=0.0)
    if args.no_prior:
        config = config.replace(beta=0.0)
    splits = _load_splits(args.data)
    m = _train_once(config, splits, args.out)
    print(json.dumps(m, sort_keys=True))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="topofilt")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write synthetic dataset splits")
    g.add_argument("--spec", required=True, help="JSON DatasetSpec file")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train and checkpoint a model")
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seeds", type=int, default=1)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--config")
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    b = sub.add_parser("export-barcodes", help="CSV of per-graph barcodes")
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--data", required=True)
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_export_barcodes)

    c = sub.add_parser("check-theorem", help="desk-scale unique-optimum check")
    c.add_argument("--config")
    c.add_argument("--instances", type=int, default=20)
    c.add_argument("--lambda0", type=float, default=16.0)
    c.set_defaults(fn=cmd_check_theorem)

    a = sub.add_parser("ablate", help="train with loss terms removed")
    a.add_argument("--config")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--no-topo", action="store_true")
    a.add_argument("--no-prior", action="store_true")
    a.set_defaults(fn=cmd_ablate)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
