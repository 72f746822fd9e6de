"""Command line interface (installed as ``exp-cli``).

Subcommands: gen-prox, train, eval, kernel-check, logic, squash, alphas,
hop-hist.  All outputs are CSV or JSON; the environment variable
``SPLAB_SEED`` provides the seed when neither a config file nor a flag
sets one.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import kernels, logic, proxgen, squash
from .experiment import ExperimentConfig, report_alphas, run_experiment
from .graphs import Dataset
from .hops import build_hop_index
from .jsonl import load_jsonl, save_jsonl
from .models import load_checkpoint, make_batch, prepare_graph


def _cmd_gen_prox(args) -> int:
    spec = proxgen.ProxSpec(h=args.h, n_pairs=args.pairs, seed=args.seed)
    dataset = proxgen.generate_dataset(spec)
    save_jsonl(dataset, args.out)
    print(f"wrote {len(dataset)} graphs ({spec.n_pairs} pairs, h={spec.h}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("dataset", "format", "model", "k", "layers", "dim", "lr", "batch_size",
                  "epochs", "dropout", "pooling", "seed", "n_splits", "run_repeats",
                  "lr_schedule", "out_dir")}
    if args.config:
        config = ExperimentConfig.from_file(args.config, **overrides)
    else:
        if overrides.get("dataset") is None:
            print("error: --dataset (or --config) is required", file=sys.stderr)
            return 2
        config = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    report = run_experiment(config, save_checkpoints=args.save_checkpoints)
    print(json.dumps({k: report[k] for k in ("config_hash", "per_split", "mean", "std")}, indent=1))
    return 0


def _cmd_eval(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    dataset = load_jsonl(args.dataset)
    from .experiment import _loss_and_metric, prepare_caches

    config = ExperimentConfig(dataset=args.dataset, model=model.kind, k=model.k,
                              layers=model.n_layers, dim=meta["dim"])
    caches = prepare_caches(dataset, config)
    loss, metric = _loss_and_metric(model, dataset, caches, list(range(len(dataset))), 64)
    name = "mae" if dataset.task.kind == "regression" else "accuracy"
    print(json.dumps({"loss": loss, name: metric, "graphs": len(dataset)}))
    return 0


def _cmd_kernel_check(args) -> int:
    dataset = load_jsonl(args.graphs)
    names = [f"g{i}" for i in range(len(dataset))]
    print("pair,wl,sp,sp_wl")
    for i in range(len(dataset)):
        for j in range(i + 1, len(dataset)):
            gi, gj = dataset.graphs[i], dataset.graphs[j]
            k = max(max(gi.n, gj.n) - 1, 1)
            print(f"{names[i]}-{names[j]},{kernels.wl_distinguish(gi, gj)},"
                  f"{kernels.sp_distinguish(gi, gj)},{kernels.sp_wl_distinguish(gi, gj, k)}")
    return 0


def _cmd_logic(args) -> int:
    with open(args.formula, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    formula = logic.parse_formula(text, k=args.k)
    classifier = logic.compile_formula(formula, args.k)
    dataset = load_jsonl(args.graphs)
    print("graph,node,compiled,oracle")
    agree = True
    for gi, graph in enumerate(dataset.graphs):
        hop_index = build_hop_index(graph, args.k)
        compiled = logic.run_compiled(classifier, graph, hop_index)
        oracle = logic.eval_bruteforce_all(formula, graph, hop_index)
        for u in range(graph.n):
            print(f"{gi},{u},{bool(compiled[u])},{bool(oracle[u])}")
            agree &= bool(compiled[u]) == bool(oracle[u])
    print(f"# agreement: {agree}", file=sys.stderr)
    return 0 if agree else 1


def _cmd_squash(args) -> int:
    rows = squash.decay_curve(args.l, args.w, args.k)
    print(squash.CSV_HEADER)
    for row in rows:
        print(row.csv())
    return 0


def _cmd_alphas(args) -> int:
    alphas = report_alphas(args.checkpoint)
    print(json.dumps({"layers": [[float(x) for x in a] for a in alphas]}, indent=1))
    return 0


def _cmd_hop_hist(args) -> int:
    dataset = load_jsonl(args.graphs)
    print("graph,node," + ",".join(f"hop{i}" for i in range(1, args.k + 1)) + ",infinity")
    for gi, graph in enumerate(dataset.graphs):
        index = build_hop_index(graph, args.k)
        for u in range(graph.n):
            sizes = ",".join(str(s) for s in index.hop_sizes(u))
            print(f"{gi},{u},{sizes},{len(index.infinity_set[u])}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exp-cli",
                                     description="shortest-path message passing laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-prox", help="generate an h-Proximity dataset")
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--pairs", type=int, default=4500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_prox)

    p = sub.add_parser("train", help="run a seeded training experiment")
    p.add_argument("--config", help="JSON config file; flags override")
    p.add_argument("--dataset")
    p.add_argument("--format", choices=["jsonl", "tu"])
    p.add_argument("--model")
    p.add_argument("--k", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--pooling", choices=["mean", "sum", "layerwise"])
    p.add_argument("--seed", type=int)
    p.add_argument("--n-splits", dest="n_splits", type=int)
    p.add_argument("--run-repeats", dest="run_repeats", type=int)
    p.add_argument("--lr-schedule", dest="lr_schedule", choices=["constant", "cosine"])
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--save-checkpoints", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a JSONL dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("kernel-check", help="pairwise distinguishability matrix")
    p.add_argument("--graphs", required=True, help="JSONL fixture file")
    p.set_defaults(fn=_cmd_kernel_check)

    p = sub.add_parser("logic", help="compiled vs brute-force truth tables")
    p.add_argument("--formula", required=True, help="file holding one formula")
    p.add_argument("--graphs", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(fn=_cmd_logic)

    p = sub.add_parser("squash", help="over-squashing decay curve CSV")
    p.add_argument("--l", type=int, default=11)
    p.add_argument("--w", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(fn=_cmd_squash)

    p = sub.add_parser("alphas", help="per-layer hop weights from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=_cmd_alphas)

    p = sub.add_parser("hop-hist", help="per-node hop-size histogram CSV")
    p.add_argument("--graphs", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(fn=_cmd_hop_hist)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
