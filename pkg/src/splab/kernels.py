"""Expressiveness kernels: 1-WL refinement, the shortest-path kernel, and
their combination.

Refinement relabels nodes through a shared ordered table rather than
hashing, so equal ids mean equal refinement histories with no collision
risk.  Cross-graph comparisons always run jointly (one table over both
graphs) so color ids are comparable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .hops import UNREACHABLE, bfs_distances, build_hop_index


@dataclass(frozen=True)
class Coloring:
    """A stable (or round-limited) node coloring with contiguous ids."""

    colors: tuple[int, ...]
    round: int
    stable: bool

    def histogram(self) -> Counter:
        return Counter(self.colors)


def _relabel(keys: list, table: dict) -> list[int]:
    out = []
    for key in keys:
        if key not in table:
            table[key] = len(table)
        out.append(table[key])
    return out


def _joint_refine(graphs: list[Graph], init: list[list], max_rounds: int | None):
    """Refine several graphs against one shared relabeling table.

    ``init`` gives per-graph initial keys (any hashable per node).  Returns
    per-graph colorings plus (rounds, stable).
    """
    total = sum(g.n for g in graphs)
    if max_rounds is None:
        max_rounds = total
    table: dict = {}
    colors = [_relabel(keys, table) for keys in init]
    adjs = [g.adjacency() for g in graphs]
    n_classes = len(table)
    rounds = 0
    stable = total == 0
    while rounds < max_rounds:
        round_table: dict = {}
        new_colors = []
        for gi, g in enumerate(graphs):
            keys = [
                (colors[gi][u], tuple(sorted(colors[gi][v] for v in adjs[gi][u])))
                for u in range(g.n)
            ]
            new_colors.append(_relabel(keys, round_table))
        # Re-key jointly so ids stay contiguous across graphs and rounds.
        offsetless: dict = {}
        new_colors = [_relabel(cs, offsetless) for cs in new_colors]
        rounds += 1
        new_n = len(offsetless)
        colors = new_colors
        if new_n == n_classes:
            stable = True
            break
        n_classes = new_n
    return [Coloring(tuple(c), rounds, stable) for c in colors], rounds, stable


def wl_refine(graph: Graph, max_rounds: int | None = None) -> Coloring:
    """1-WL color refinement from the graph's node colors."""
    colorings, _, _ = _joint_refine([graph], [list(graph.colors)], max_rounds)
    return colorings[0]


def wl_distinguish(g1: Graph, g2: Graph) -> bool:
    """True iff jointly refined stable color histograms differ."""
    colorings, _, _ = _joint_refine([g1, g2], [list(g1.colors), list(g2.colors)], None)
    return colorings[0].histogram() != colorings[1].histogram()


@dataclass(frozen=True)
class SpFeature:
    """Shortest-path statistics of one graph.

    ``pair_histogram`` maps distance (or math.inf) to the number of
    unordered node pairs at that distance.  ``node_histograms`` has shape
    (n, n): column d-1 counts nodes at distance d for d in 1..n-1 and the
    last column counts unreachable nodes, so each row sums to n-1.
    """

    pair_histogram: Counter
    node_histograms: np.ndarray


def sp_feature(graph: Graph) -> SpFeature:
    n = graph.n
    adj = graph.adjacency()
    pair_hist: Counter = Counter()
    node_hist = np.zeros((n, max(n, 1)), dtype=np.int64)
    for u in range(n):
        dist = bfs_distances(adj, u, n)
        for v in range(n):
            if v == u:
                continue
            d = dist[v]
            if d == UNREACHABLE:
                node_hist[u, n - 1] += 1
                if v > u:
                    pair_hist[math.inf] += 1
            else:
                node_hist[u, d - 1] += 1
                if v > u:
                    pair_hist[d] += 1
    node_hist.setflags(write=False)
    return SpFeature(pair_hist, node_hist)


def sp_distinguish(g1: Graph, g2: Graph) -> bool:
    """True iff the pair-distance multisets differ (infinity bin included)."""
    return sp_feature(g1).pair_histogram != sp_feature(g2).pair_histogram


def wiener_index(graph: Graph):
    """Sum of shortest-path lengths over unordered pairs; inf if disconnected."""
    total = 0
    adj = graph.adjacency()
    for u in range(graph.n):
        dist = bfs_distances(adj, u, graph.n)
        for v in range(u + 1, graph.n):
            if dist[v] == UNREACHABLE:
                return math.inf
            total += dist[v]
    return total


def _sp_wl_init(graph: Graph, k: int) -> list[tuple]:
    index = build_hop_index(graph, k)
    return [
        (graph.colors[u],) + index.hop_sizes(u) + (len(index.infinity_set[u]),)
        for u in range(graph.n)
    ]


def sp_wl_refine(graph: Graph, k: int, max_rounds: int | None = None) -> Coloring:
    """Hop-size recoloring (round 0) followed by standard 1-WL refinement."""
    colorings, _, _ = _joint_refine([graph], [_sp_wl_init(graph, k)], max_rounds)
    return colorings[0]


def sp_wl_distinguish(g1: Graph, g2: Graph, k: int) -> bool:
    colorings, _, _ = _joint_refine(
        [g1, g2], [_sp_wl_init(g1, k), _sp_wl_init(g2, k)], None
    )
    return colorings[0].histogram() != colorings[1].histogram()
