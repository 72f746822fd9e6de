"""Graph and dataset data model.

Graphs are simple and undirected.  Disconnected graphs are accepted
everywhere; connectivity is a queryable property, never a precondition.
Instances are treated as immutable after construction and are safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class FormatError(ValueError):
    """Raised when an input file or record does not match its format."""


def _as_edge_tuple(edges) -> tuple[tuple[int, int], ...]:
    return tuple((int(u), int(v)) for u, v in edges)


@dataclass(frozen=True)
class Graph:
    """An undirected graph with per-node colors and optional extras.

    ``edges`` is stored as given; use :func:`validate` to detect self-loops,
    duplicates or out-of-range endpoints.  Parsers and generators in this
    package always produce canonical edges (u < v, sorted, unique).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    colors: tuple[int, ...]
    relations: Optional[tuple[int, ...]] = None
    features: Optional[np.ndarray] = None
    label: object = None

    def __post_init__(self):
        object.__setattr__(self, "edges", _as_edge_tuple(self.edges))
        object.__setattr__(self, "colors", tuple(int(c) for c in self.colors))
        if self.relations is not None:
            object.__setattr__(self, "relations", tuple(int(r) for r in self.relations))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)

    def adjacency(self) -> list[list[int]]:
        """Sorted neighbor lists (computed on demand; graphs are small)."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for row in adj:
            row.sort()
        return adj

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def with_extra_edge(self, u: int, v: int) -> "Graph":
        """A copy of this graph with one additional edge, colors preserved."""
        a, b = (u, v) if u < v else (v, u)
        new_edges = tuple(sorted(self.edges + ((a, b),)))
        return Graph(self.n, new_edges, self.colors, self.relations and self.relations + (0,),
                     self.features, self.label)

    def relabeled(self, perm: Sequence[int]) -> "Graph":
        """Apply a node permutation: node i becomes perm[i]."""
        perm = list(perm)
        edges = tuple(sorted(tuple(sorted((perm[u], perm[v]))) for u, v in self.edges))
        colors = [0] * self.n
        for i, c in enumerate(self.colors):
            colors[perm[i]] = c
        feats = None
        if self.features is not None:
            feats = np.empty_like(self.features)
            feats[list(perm)] = self.features
        return Graph(self.n, edges, tuple(colors), None, feats, self.label)


def validate(graph: Graph) -> list[str]:
    """Check graph invariants, returning violations as data (never raising).

    An empty list means the graph is a valid simple graph with in-range
    endpoints and consistent feature dimensions.
    """
    problems: list[str] = []
    seen: set[tuple[int, int]] = set()
    for u, v in graph.edges:
        if not (0 <= u < graph.n and 0 <= v < graph.n):
            problems.append(f"edge ({u},{v}) endpoint out of range for n={graph.n}")
            continue
        if u == v:
            problems.append(f"self-loop at {u}")
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            problems.append(f"duplicate edge ({key[0]},{key[1]})")
        seen.add(key)
    if len(graph.colors) != graph.n:
        problems.append(f"expected {graph.n} node colors, got {len(graph.colors)}")
    if graph.relations is not None and len(graph.relations) != len(graph.edges):
        problems.append("relation list length does not match edge count")
    if graph.features is not None:
        feats = graph.features
        if feats.ndim != 2 or feats.shape[0] != graph.n:
            problems.append("feature matrix must be n x d")
    return problems


def is_connected(graph: Graph) -> bool:
    if graph.n == 0:
        return True
    adj = graph.adjacency()
    seen = [False] * graph.n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == graph.n


@dataclass(frozen=True)
class Task:
    """Prediction task attached to a dataset.

    ``kind`` is one of ``binary-class``, ``multi-class`` or ``regression``;
    ``cardinality`` is the class count or the number of regression targets.
    """

    kind: str
    cardinality: int

    def __post_init__(self):
        if self.kind not in ("binary-class", "multi-class", "regression"):
            raise ValueError(f"unknown task kind: {self.kind}")


def infer_task(graphs: Sequence[Graph]) -> Optional[Task]:
    labels = [g.label for g in graphs if g.label is not None]
    if not labels:
        return None
    if any(isinstance(l, (list, tuple)) for l in labels):
        sizes = {len(l) for l in labels if isinstance(l, (list, tuple))}
        return Task("regression", max(sizes))
    if any(isinstance(l, float) for l in labels):
        return Task("regression", 1)
    classes = sorted(set(int(l) for l in labels))
    if len(classes) <= 2:
        return Task("binary-class", 2)
    return Task("multi-class", len(classes))


@dataclass
class Dataset:
    """An ordered list of graphs plus task and split bookkeeping."""

    graphs: list[Graph]
    task: Optional[Task] = None
    splits: list[tuple[list[int], list[int], list[int]]] = field(default_factory=list)
    meta: Optional[dict] = None

    def __post_init__(self):
        if self.task is None:
            self.task = infer_task(self.graphs)
        for i, (train, valid, test) in enumerate(self.splits):
            ids = train + valid + test
            if len(set(train) & set(valid)) or len(set(train) & set(test)) or len(set(valid) & set(test)):
                raise ValueError(f"split {i} has overlapping id sets")
            if ids and (min(ids) < 0 or max(ids) >= len(self.graphs)):
                raise ValueError(f"split {i} references graphs out of range")

    def __len__(self) -> int:
        return len(self.graphs)

    def n_relations(self) -> int:
        r = 0
        for g in self.graphs:
            if g.relations:
                r = max(r, max(g.relations) + 1)
        return r

    def n_colors(self) -> int:
        c = 0
        for g in self.graphs:
            if g.colors:
                c = max(c, max(g.colors) + 1)
        return max(c, 1)
