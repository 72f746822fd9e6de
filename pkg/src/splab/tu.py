"""Loader for the TU graph-classification directory format.

Expects the published layout: ``DS_A.txt`` (1-indexed global edge pairs,
comma separated), ``DS_graph_indicator.txt`` (node -> graph id),
``DS_graph_labels.txt`` and optionally ``DS_node_labels.txt``.  Node ids are
remapped to contiguous 0-based per-graph ids and symmetric duplicate pairs
collapse to one undirected edge.
"""

from __future__ import annotations

import os

from .graphs import Dataset, FormatError, Graph, infer_task

_REQUIRED = ("A.txt", "graph_indicator.txt", "graph_labels.txt")


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def _dataset_prefix(directory: str) -> str:
    for name in sorted(os.listdir(directory)):
        if name.endswith("_A.txt"):
            return name[: -len("_A.txt")]
    raise FormatError(f"no *_A.txt edge file found in {directory}")


def parse_tu_dataset(directory: str) -> Dataset:
    prefix = _dataset_prefix(directory)
    paths = {suffix: os.path.join(directory, f"{prefix}_{suffix}") for suffix in _REQUIRED}
    for suffix, path in paths.items():
        if not os.path.exists(path):
            raise FormatError(f"missing mandatory file {prefix}_{suffix} in {directory}")

    indicator = []
    for lineno, line in enumerate(_read_lines(paths["graph_indicator.txt"]), start=1):
        try:
            indicator.append(int(line))
        except ValueError:
            raise FormatError(f"graph_indicator line {lineno}: not an integer: {line!r}") from None
    n_graphs = max(indicator) if indicator else 0

    # Global 1-indexed node id -> (graph index, local 0-based id).
    local_of: list[tuple[int, int]] = []
    sizes = [0] * n_graphs
    for gid in indicator:
        g = gid - 1
        local_of.append((g, sizes[g]))
        sizes[g] += 1

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(n_graphs)]
    for lineno, line in enumerate(_read_lines(paths["A.txt"]), start=1):
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise FormatError(f"{prefix}_A.txt line {lineno}: expected two node ids, got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        if not (1 <= u <= len(local_of)) or not (1 <= v <= len(local_of)):
            raise FormatError(f"{prefix}_A.txt line {lineno}: edge references unknown node")
        gu, lu = local_of[u - 1]
        gv, lv = local_of[v - 1]
        if gu != gv:
            raise FormatError(f"{prefix}_A.txt line {lineno}: edge crosses graph boundary")
        if lu == lv:
            continue  # TU files occasionally carry self-loops; the model is simple graphs
        edge_sets[gu].add((min(lu, lv), max(lu, lv)))

    labels = []
    for lineno, line in enumerate(_read_lines(paths["graph_labels.txt"]), start=1):
        try:
            labels.append(int(float(line)))
        except ValueError:
            raise FormatError(f"graph_labels line {lineno}: not a number: {line!r}") from None
    if len(labels) != n_graphs:
        raise FormatError(f"expected {n_graphs} graph labels, got {len(labels)}")

    node_label_path = os.path.join(directory, f"{prefix}_node_labels.txt")
    colors = [[0] * size for size in sizes]
    if os.path.exists(node_label_path):
        raw = _read_lines(node_label_path)
        if len(raw) != len(indicator):
            raise FormatError("node_labels length does not match graph_indicator")
        for idx, line in enumerate(raw):
            g, l = local_of[idx]
            colors[g][l] = int(float(line))

    # Class ids remapped to 0..c-1 in sorted label order; raw labels preserved in meta.
    classes = sorted(set(labels))
    class_of = {c: i for i, c in enumerate(classes)}
    graphs = [
        Graph(sizes[g], tuple(sorted(edge_sets[g])), tuple(colors[g]), None, None, class_of[labels[g]])
        for g in range(n_graphs)
    ]
    dataset = Dataset(graphs, task=infer_task(graphs),
                      meta={"source": "tu", "name": prefix, "raw_labels": classes})
    return dataset
