"""Seeded training runs and the fixed-split evaluation protocol.

A run trains one model on one split; test performance is read at the epoch
with the best validation loss.  An experiment fans out splits x repeats,
averages repeats within a split and reports mean and standard deviation
across splits.  Splits are a function of the dataset and seed only, so
every model sees identical splits.  Results append to a CSV ledger and each
run writes a JSON report.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tape
from .graphs import Dataset
from .jsonl import load_jsonl
from .models import (GraphBatch, GraphModel, MODEL_KINDS, hops_needed, make_batch,
                     needs_distances, prepare_graph, save_checkpoint, load_checkpoint)
from .tu import parse_tu_dataset

BASELINES = ("gin-baseline", "gcn-baseline", "gat-baseline")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid config: " + "; ".join(problems))
        self.problems = problems


@dataclass
class ExperimentConfig:
    dataset: str
    format: str = "jsonl"
    model: str = "spn"
    k: int = 1
    layers: int = 2
    dim: int = 64
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 200
    dropout: float = 0.5
    pooling: str = "layerwise"
    seed: Optional[int] = None
    n_splits: int = 10
    run_repeats: int = 3
    max_degree: int = 128
    lr_schedule: str = "constant"
    out_dir: Optional[str] = None

    def problems(self) -> list[str]:
        out = []
        if self.format not in ("jsonl", "tu"):
            out.append(f"unknown format {self.format!r}")
        if self.model not in MODEL_KINDS:
            out.append(f"unknown model {self.model!r}")
        for name in ("k", "layers", "dim", "batch_size", "epochs", "n_splits", "run_repeats"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be positive")
        if self.lr <= 0:
            out.append("lr must be positive")
        if not (0.0 <= self.dropout < 1.0):
            out.append("dropout must be in [0, 1)")
        if self.pooling not in ("mean", "sum", "layerwise"):
            out.append(f"unknown pooling {self.pooling!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            out.append(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.model in BASELINES and self.k != 1:
            out.append(f"{self.model} supports k=1 only (got k={self.k})")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def resolved_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        return int(os.environ.get("SPLAB_SEED", "0"))

    def hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:12]

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def desk_config(dataset: str, model: str, k: int, layers: int, **kw) -> ExperimentConfig:
    """Desk-scale preset: 50 epochs, 3 splits x 2 repeats."""
    base = dict(dataset=dataset, model=model, k=k, layers=layers,
                epochs=50, n_splits=3, run_repeats=2)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# splits


def make_splits(n_units: int, n_splits: int, seed: int,
                fractions: tuple[float, float] = (0.8, 0.1)) -> list[tuple[list[int], list[int], list[int]]]:
    """Disjoint train/valid/test unit splits, a function of (n, seed) only."""
    if n_units < 3:
        raise ValueError("need at least 3 units to split")
    splits = []
    for s in range(n_splits):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 7001, s)))
        perm = rng.permutation(n_units)
        n_train = min(max(int(round(fractions[0] * n_units)), 1), n_units - 2)
        n_valid = min(max(int(round(fractions[1] * n_units)), 1), n_units - n_train - 1)
        train = sorted(int(i) for i in perm[:n_train])
        valid = sorted(int(i) for i in perm[n_train:n_train + n_valid])
        test = sorted(int(i) for i in perm[n_train + n_valid:])
        splits.append((train, valid, test))
    return splits


def dataset_splits(dataset: Dataset, n_splits: int, seed: int):
    """Graph-id splits; paired datasets (positive/negative twins) are split
    at the pair level so classes stay balanced in every subset."""
    paired = bool(dataset.meta and dataset.meta.get("prox_spec", {}).get("paired"))
    if paired and len(dataset) % 2 == 0:
        unit_splits = make_splits(len(dataset) // 2, n_splits, seed)
        expand = lambda ids: [g for i in ids for g in (2 * i, 2 * i + 1)]
        return [(expand(a), expand(b), expand(c)) for a, b, c in unit_splits]
    return make_splits(len(dataset), n_splits, seed)


# ---------------------------------------------------------------------------
# single training run


@dataclass
class RunResult:
    train_losses: list[float]
    val_losses: list[float]
    val_metrics: list[float]
    best_epoch: int
    test_metric: float
    wall_time: float
    alpha_history: list[list[list[float]]] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _targets(dataset: Dataset, ids: list[int]):
    if dataset.task.kind == "regression":
        return np.asarray([dataset.graphs[i].label for i in ids], dtype=np.float64).reshape(len(ids), -1)
    return np.asarray([int(dataset.graphs[i].label) for i in ids], dtype=np.int64)


def _eval_batches(dataset: Dataset, caches, ids: list[int], batch_size: int):
    out = []
    for lo in range(0, len(ids), batch_size):
        chunk = ids[lo:lo + batch_size]
        out.append((make_batch([caches[i] for i in chunk]), _targets(dataset, chunk), len(chunk)))
    return out


def _evaluate(model: GraphModel, task_kind: str, batches) -> tuple[float, float]:
    total_loss = 0.0
    metric_acc = 0.0
    count = 0
    for batch, targets, size in batches:
        out = model.forward(batch, training=False)
        if task_kind == "regression":
            loss = float(ad.mse_loss(out, targets).data)
            metric_acc += float(np.abs(out.data - targets).mean()) * size
        else:
            loss = float(ad.cross_entropy(out, targets).data)
            metric_acc += float((out.data.argmax(axis=1) == targets).sum())
        total_loss += loss * size
        count += size
    return total_loss / count, metric_acc / count


def _loss_and_metric(model: GraphModel, dataset: Dataset, caches, ids: list[int],
                     batch_size: int) -> tuple[float, float]:
    return _evaluate(model, dataset.task.kind,
                     _eval_batches(dataset, caches, ids, batch_size))


def _is_paired(dataset: Dataset) -> bool:
    return bool(dataset.meta and dataset.meta.get("prox_spec", {}).get("paired"))


def _train_batches(train_ids: list[int], batch_size: int, paired: bool,
                   rng: np.random.Generator) -> list[list[int]]:
    """Shuffled minibatch id lists.

    Paired datasets shuffle and chunk at the pair level so both twins of a
    pair share a batch: their batch-norm statistics then match and the
    one-edge difference survives normalization.
    """
    if paired and len(train_ids) % 2 == 0:
        units = [(train_ids[i], train_ids[i + 1]) for i in range(0, len(train_ids), 2)]
        order = rng.permutation(len(units))
        per_batch = max(batch_size // 2, 1)
        return [[g for ui in order[lo:lo + per_batch] for g in units[ui]]
                for lo in range(0, len(order), per_batch)]
    order = rng.permutation(len(train_ids))
    return [[train_ids[i] for i in order[lo:lo + batch_size]]
            for lo in range(0, len(order), batch_size)]


def train_single(dataset: Dataset, caches, split, config: ExperimentConfig,
                 run_seed) -> tuple[RunResult, GraphModel]:
    rng = np.random.default_rng(run_seed)
    train_ids, valid_ids, test_ids = split
    out_dim = dataset.task.cardinality if dataset.task.kind != "binary-class" else 2
    model = GraphModel(config.model, dataset.n_colors(), config.dim, config.k,
                       config.layers, out_dim, config.pooling, config.dropout, rng,
                       n_relations=max(dataset.n_relations(), 1),
                       max_degree=config.max_degree)
    opt = Adam(model.parameters(), lr=config.lr)
    result = RunResult([], [], [], best_epoch=0, test_metric=0.0, wall_time=0.0)
    started = time.time()
    best_val = np.inf
    best_state = None
    paired = _is_paired(dataset)
    valid_batches = _eval_batches(dataset, caches, valid_ids, config.batch_size)
    for epoch in range(config.epochs):
        if config.lr_schedule == "cosine":
            opt.lr = config.lr * 0.5 * (1.0 + np.cos(np.pi * epoch / config.epochs))
        epoch_loss = 0.0
        for chunk in _train_batches(train_ids, config.batch_size, paired, rng):
            batch = make_batch([caches[i] for i in chunk])
            targets = _targets(dataset, chunk)
            opt.zero_grad()
            with Tape() as tape:
                out = model.forward(batch, training=True, rng=rng)
                if dataset.task.kind == "regression":
                    loss = ad.mse_loss(out, targets)
                else:
                    loss = ad.cross_entropy(out, targets)
            tape.backward(loss)
            opt.step()
            epoch_loss += float(loss.data) * len(chunk)
        result.train_losses.append(epoch_loss / len(train_ids))
        val_loss, val_metric = _evaluate(model, dataset.task.kind, valid_batches)
        result.val_losses.append(val_loss)
        result.val_metrics.append(val_metric)
        alphas = model.alpha_vectors()
        if alphas:
            result.alpha_history.append([list(map(float, a)) for a in alphas])
        if val_loss < best_val:
            best_val = val_loss
            result.best_epoch = epoch
            best_state = {k: v.copy() for k, v in model.named_arrays().items()}
    # test metric belongs to the best-validation epoch: restore and evaluate once
    if best_state is not None:
        model.load_arrays(best_state)
    test_batches = _eval_batches(dataset, caches, test_ids, config.batch_size)
    _, result.test_metric = _evaluate(model, dataset.task.kind, test_batches)
    result.wall_time = time.time() - started
    return result, model


# ---------------------------------------------------------------------------
# experiment driver


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.format == "tu":
        return parse_tu_dataset(config.dataset)
    return load_jsonl(config.dataset)


def prepare_caches(dataset: Dataset, config: ExperimentConfig):
    k = hops_needed(config.model, config.k)
    with_d = needs_distances(config.model)
    n_rel = max(dataset.n_relations(), 1)
    return [prepare_graph(g, k, n_relations=n_rel, with_distances=with_d)
            for g in dataset.graphs]


def _append_ledger(path: str, row: dict) -> None:
    header = ",".join(row.keys())
    line = ",".join(str(v) for v in row.values())
    exists = os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if not exists:
            fh.write(header + "\n")
        fh.write(line + "\n")


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None,
                   save_checkpoints: bool = False) -> dict:
    config.validate()
    seed = config.resolved_seed()
    if dataset is None:
        dataset = load_dataset(config)
    if dataset.task is None:
        raise ValueError("dataset has no labels; nothing to train")
    caches = prepare_caches(dataset, config)
    splits = dataset_splits(dataset, config.n_splits, seed)
    out_dir = config.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"splits-seed{seed}.json"), "w", encoding="utf-8") as fh:
            json.dump(splits, fh)

    per_split = []
    runs = []
    for si, split in enumerate(splits):
        metrics = []
        for ri in range(config.run_repeats):
            run_seed = np.random.SeedSequence((seed, 4242, si, ri))
            result, model = train_single(dataset, caches, split, config, run_seed)
            metrics.append(result.test_metric)
            record = {"split": si, "repeat": ri, **result.to_json()}
            runs.append(record)
            if out_dir:
                tag = f"{config.hash()}-s{si}r{ri}"
                with open(os.path.join(out_dir, f"run-{tag}.json"), "w", encoding="utf-8") as fh:
                    json.dump({"config": asdict(config), **record}, fh, indent=1)
                if save_checkpoints:
                    save_checkpoint(model, os.path.join(out_dir, f"ckpt-{tag}.npz"),
                                    extra_meta={"config_hash": config.hash()})
                _append_ledger(os.path.join(out_dir, "ledger.csv"), {
                    "when": int(time.time()), "config_hash": config.hash(),
                    "dataset": os.path.basename(config.dataset), "model": config.model,
                    "k": config.k, "layers": config.layers, "dim": config.dim,
                    "lr": config.lr, "epochs": config.epochs, "seed": seed,
                    "split": si, "repeat": ri, "best_epoch": result.best_epoch,
                    "val_loss": result.val_losses[result.best_epoch],
                    "test_metric": result.test_metric,
                })
        per_split.append(float(np.mean(metrics)))

    report = {
        "config": asdict(config),
        "config_hash": config.hash(),
        "seed": seed,
        "per_split": per_split,
        "mean": float(np.mean(per_split)),
        "std": float(np.std(per_split)),
        "runs": runs,
    }
    if out_dir:
        with open(os.path.join(out_dir, f"report-{config.hash()}.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    return report


def report_alphas(checkpoint_path: str) -> list[np.ndarray]:
    """Softmaxed per-layer hop weights from a checkpoint; errors for models
    without hop weights."""
    model, _ = load_checkpoint(checkpoint_path)
    alphas = model.alpha_vectors()
    if not alphas:
        raise ValueError(f"model kind {model.kind!r} has no hop weights to report")
    return alphas
