"""Shortest-path hop decompositions.

For every node u the index stores the i-hop neighborhoods N_1(u)..N_k(u)
(nodes whose shortest-path distance from u is exactly i) plus the bucket of
unreachable nodes.  One breadth-first search per source node, O(|V||E|)
total; the result is immutable and can be reused across model layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graphs import Graph

UNREACHABLE = -1  # sentinel inside integer distance tables


def bfs_distances(adj: list[list[int]], source: int, n: int) -> list[int]:
    """Distances from ``source``; UNREACHABLE for disconnected nodes."""
    dist = [UNREACHABLE] * n
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if dist[v] == UNREACHABLE:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


@dataclass(frozen=True)
class HopIndex:
    """Per-node shortest-path neighborhoods, truncated at ``k``.

    ``neighborhoods[u][i-1]`` lists nodes at distance exactly i (sorted);
    nodes at finite distance > k appear in no bucket.  ``infinity_set[u]``
    lists unreachable nodes.  ``distances`` is the optional full table
    (UNREACHABLE entries for disconnected pairs).
    """

    n: int
    k: int
    neighborhoods: tuple[tuple[tuple[int, ...], ...], ...]
    infinity_set: tuple[tuple[int, ...], ...]
    distances: Optional[np.ndarray] = None

    def hop(self, u: int, i: int) -> tuple[int, ...]:
        return self.neighborhoods[u][i - 1]

    def hop_sizes(self, u: int) -> tuple[int, ...]:
        return tuple(len(b) for b in self.neighborhoods[u])


def build_hop_index(graph: Graph, k: int, with_distances: bool = False) -> HopIndex:
    if k < 1:
        raise ValueError("k must be >= 1")
    n = graph.n
    adj = graph.adjacency()
    neighborhoods = []
    infinity = []
    table = np.full((n, n), UNREACHABLE, dtype=np.int64) if with_distances else None
    for u in range(n):
        dist = bfs_distances(adj, u, n)
        if table is not None:
            table[u] = dist
        buckets: list[list[int]] = [[] for _ in range(k)]
        unreachable = []
        for v in range(n):
            d = dist[v]
            if v == u:
                continue
            if d == UNREACHABLE:
                unreachable.append(v)
            elif d <= k:
                buckets[d - 1].append(v)
        neighborhoods.append(tuple(tuple(b) for b in buckets))
        infinity.append(tuple(unreachable))
    if table is not None:
        table.setflags(write=False)
    return HopIndex(n, k, tuple(neighborhoods), tuple(infinity), table)


@dataclass(frozen=True)
class CooMatrix:
    """Symmetric sparse matrix as coordinate lists sorted by (row, col)."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        out[self.rows, self.cols] = self.vals
        return out


@dataclass(frozen=True)
class HopAdjacency:
    """Per-hop 0/1 adjacency, degree tables and normalized adjacency.

    For hop i, ``normalized[i-1]`` holds
    D_i^{-1/2} (A_i + I) D_i^{-1/2} with D_i the degree-plus-one diagonal,
    stored sparse; entries are positive exactly on the support of A_i + I.
    """

    n: int
    k: int
    adjacency: tuple[CooMatrix, ...]
    degrees: tuple[np.ndarray, ...]   # row sums of A_i + I
    normalized: tuple[CooMatrix, ...]

    def normalized_dense(self, i: int) -> np.ndarray:
        return self.normalized[i - 1].to_dense()


def build_hop_adjacency(index: HopIndex) -> HopAdjacency:
    n = index.n
    adjacency = []
    degrees = []
    normalized = []
    for i in range(1, index.k + 1):
        rows, cols = [], []
        for u in range(n):
            for v in index.hop(u, i):
                rows.append(u)
                cols.append(v)
        rows_a = np.asarray(rows, dtype=np.int64)
        cols_a = np.asarray(cols, dtype=np.int64)
        adjacency.append(CooMatrix(n, rows_a, cols_a, np.ones(len(rows), dtype=np.float64)))
        deg = np.bincount(rows_a, minlength=n).astype(np.float64) + 1.0
        degrees.append(deg)
        # A_i + I support: hop pairs plus the diagonal.
        nr = np.concatenate([rows_a, np.arange(n, dtype=np.int64)])
        nc = np.concatenate([cols_a, np.arange(n, dtype=np.int64)])
        order = np.lexsort((nc, nr))
        nr, nc = nr[order], nc[order]
        vals = 1.0 / np.sqrt(deg[nr] * deg[nc])
        normalized.append(CooMatrix(n, nr, nc, vals))
    for d in degrees:
        d.setflags(write=False)
    return HopAdjacency(n, index.k, tuple(adjacency), tuple(degrees), tuple(normalized))


def diameter(graph: Graph):
    """Largest finite shortest-path distance; math.inf when disconnected."""
    if graph.n == 0:
        return 0
    adj = graph.adjacency()
    best = 0
    for u in range(graph.n):
        dist = bfs_distances(adj, u, graph.n)
        for d in dist:
            if d == UNREACHABLE:
                return math.inf
            best = max(best, d)
    return best
