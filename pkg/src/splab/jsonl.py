"""JSONL graph interchange format.

One JSON object per line with fields ``n``, ``edges`` (``[u, v]`` or
``[u, v, rel]``), ``colors`` and optional ``features`` / ``label``.  A line
whose object carries the key ``_header`` is treated as dataset metadata, not
as a graph.  ``parse(emit(dataset))`` is the identity on valid datasets.
See docs/formats.md.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Optional

import numpy as np

from .graphs import Dataset, FormatError, Graph, Task


def graph_to_obj(graph: Graph) -> dict:
    obj: dict = {"n": graph.n}
    if graph.relations is not None:
        obj["edges"] = [[u, v, r] for (u, v), r in zip(graph.edges, graph.relations)]
    else:
        obj["edges"] = [[u, v] for u, v in graph.edges]
    obj["colors"] = list(graph.colors)
    if graph.features is not None:
        obj["features"] = [list(row) for row in graph.features.tolist()]
    if graph.label is not None:
        obj["label"] = list(graph.label) if isinstance(graph.label, tuple) else graph.label
    return obj


def graph_from_obj(obj: dict, lineno: int = 0) -> Graph:
    where = f" (line {lineno})" if lineno else ""
    try:
        n = int(obj["n"])
        raw_edges = obj["edges"]
        colors = obj["colors"]
    except KeyError as exc:
        raise FormatError(f"missing field {exc}{where}") from None
    edges = []
    relations = []
    has_rel = False
    for e in raw_edges:
        if len(e) == 3:
            has_rel = True
            edges.append((e[0], e[1]))
            relations.append(e[2])
        elif len(e) == 2:
            edges.append((e[0], e[1]))
            relations.append(0)
        else:
            raise FormatError(f"edge entry {e!r} must have 2 or 3 items{where}")
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(f"edge ({u},{v}) out of range for n={n}{where}")
    if len(colors) != n:
        raise FormatError(f"expected {n} colors, got {len(colors)}{where}")
    features = None
    if "features" in obj and obj["features"] is not None:
        features = np.asarray(obj["features"], dtype=np.float64)
    label = obj.get("label")
    if isinstance(label, list):
        label = tuple(label)
    return Graph(n, tuple(edges), tuple(colors),
                 tuple(relations) if has_rel else None, features, label)


def parse_jsonl(stream: IO[str] | Iterable[str]) -> Dataset:
    graphs: list[Graph] = []
    meta: Optional[dict] = None
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed JSON on line {lineno}: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise FormatError(f"line {lineno} is not a JSON object")
        if "_header" in obj:
            meta = obj["_header"]
            continue
        graphs.append(graph_from_obj(obj, lineno))
    task = None
    if meta and "task" in meta:
        task = Task(meta["task"]["kind"], meta["task"]["cardinality"])
    return Dataset(graphs, task=task, meta=meta)


def emit_jsonl(dataset: Dataset, stream: IO[str]) -> None:
    if dataset.meta is not None:
        stream.write(json.dumps({"_header": dataset.meta}, separators=(",", ":"), sort_keys=True))
        stream.write("\n")
    for g in dataset.graphs:
        stream.write(json.dumps(graph_to_obj(g), separators=(",", ":")))
        stream.write("\n")


def load_jsonl(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_jsonl(fh)


def save_jsonl(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        emit_jsonl(dataset, fh)
