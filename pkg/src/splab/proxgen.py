"""h-Proximity dataset generation.

Graphs are layered: consecutive levels are fully connected, nodes within a
level are disconnected, so a structure is fixed by its level count l and
width w.  Positives color the graph so that every red node has exactly two
blue nodes within h hops; the paired negative adds one edge that pulls a
distant blue inside some red node's h-ball.  ``check_label`` is the
independent verdict (shortest paths only, no generator state).

Color ids: 0 = red, 1 = blue, 2..9 auxiliary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphs import Dataset, Graph, Task
from .hops import UNREACHABLE, bfs_distances

RED = 0
BLUE = 1
N_COLORS = 10

COLORING_TRIES = 200     # coloring attempts before the structure is regenerated
STRUCTURE_TRIES = 50


class GenerationError(RuntimeError):
    """No valid pair found within the retry budget."""


@dataclass(frozen=True)
class ProxSpec:
    h: int
    n_pairs: int = 4500
    l_range: tuple[int, int] = (15, 25)        # inclusive level-count range
    w_range: tuple[int, int] = (3, 10)         # inclusive level-width range
    distant_blue_range: tuple[int, int] = (0, 3)
    aux_colors: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("h must be >= 1")
        if self.n_pairs % 3 != 0:
            raise ValueError("n_pairs must be divisible by 3 (red-count partition)")
        for lo, hi in (self.l_range, self.w_range, self.distant_blue_range):
            if hi < lo:
                raise ValueError("empty range")

    def to_meta(self) -> dict:
        return {
            "h": self.h, "n_pairs": self.n_pairs,
            "l_range": list(self.l_range), "w_range": list(self.w_range),
            "distant_blue_range": list(self.distant_blue_range),
            "aux_colors": self.aux_colors, "seed": self.seed,
            "paired": True,
        }


@dataclass(frozen=True)
class ProxPair:
    positive: Graph
    negative: Graph
    added_edge: tuple[int, int]


def gen_structure(l: int, w: int, rng=None) -> Graph:
    """The layered graph on l*w nodes; node id = level*w + slot."""
    if l < 2 or w < 1:
        raise ValueError("need l >= 2 and w >= 1")
    edges = []
    for level in range(l - 1):
        for a in range(level * w, (level + 1) * w):
            for b in range((level + 1) * w, (level + 2) * w):
                edges.append((a, b))
    return Graph(l * w, tuple(sorted(edges)), (0,) * (l * w))


def _structure_distances(l: int, w: int) -> np.ndarray:
    """Closed-form pairwise distances of the layered structure: the level
    gap when levels differ, 2 within a level, 0 on the diagonal."""
    levels = np.arange(l * w) // w
    dist = np.abs(levels[:, None] - levels[None, :])
    same = dist == 0
    dist[same] = 2
    np.fill_diagonal(dist, 0)
    return dist


def _try_coloring(dist: np.ndarray, h: int, n_red: int, aux_colors: int,
                  distant_range: tuple[int, int], rng: np.random.Generator):
    """One coloring attempt; None when the blue placement gets stuck."""
    n = dist.shape[0]
    reds = rng.choice(n, size=n_red, replace=False)
    in_radius = dist[reds] <= h            # (n_red, n)
    colors = np.full(n, -1, dtype=np.int64)
    colors[reds] = RED
    counts = np.zeros(n_red, dtype=np.int64)

    while (counts < 2).any():
        uncolored = colors == -1
        near_any = in_radius.any(axis=0) & uncolored
        # a blue here must not push any red that covers it past two
        blocked = (in_radius & (counts == 2)[:, None]).any(axis=0)
        candidates = np.flatnonzero(near_any & ~blocked)
        if len(candidates) == 0:
            return None
        pick = int(candidates[rng.integers(len(candidates))])
        colors[pick] = BLUE
        counts += in_radius[:, pick]

    distant = np.flatnonzero((colors == -1) & ~in_radius.any(axis=0))
    want = int(rng.integers(distant_range[0], distant_range[1] + 1))
    if want > 0 and len(distant) >= want:
        chosen = rng.choice(distant, size=want, replace=False)
        colors[chosen] = BLUE
    # skipped entirely when there are too few distant nodes

    rest = np.flatnonzero(colors == -1)
    colors[rest] = 2 + rng.integers(0, aux_colors, size=len(rest))
    return colors, reds


def _violating_edges(dist: np.ndarray, reds: np.ndarray, distant_blues: np.ndarray,
                     h: int, w: int) -> np.ndarray:
    """Non-edges whose addition brings some distant blue within h hops of
    some red node (exact single-edge shortest-path update)."""
    n = dist.shape[0]
    mask = np.zeros((n, n), dtype=bool)
    for r in reds:
        for bl in distant_blues:
            via = dist[r][:, None] + 1 + dist[bl][None, :]
            mask |= np.minimum(via, via.T) <= h
    levels = np.arange(n) // w
    existing = np.abs(levels[:, None] - levels[None, :]) == 1
    mask &= ~existing
    mask &= np.triu(np.ones((n, n), dtype=bool), k=1)
    return np.argwhere(mask)


def gen_pair(spec: ProxSpec, l: int, w: int, n_red: int,
             rng: np.random.Generator) -> ProxPair:
    """One positive/negative pair; regenerates the structure when coloring
    or negative-edge selection keeps failing."""
    for _ in range(STRUCTURE_TRIES):
        dist = _structure_distances(l, w)
        for _ in range(COLORING_TRIES):
            colored = _try_coloring(dist, spec.h, n_red, spec.aux_colors,
                                    spec.distant_blue_range, rng)
            if colored is None:
                continue
            colors, reds = colored
            blues = np.flatnonzero(colors == BLUE)
            distant_blues = blues[(dist[reds][:, blues] > spec.h).all(axis=0)]
            if len(distant_blues) == 0:
                continue
            candidates = _violating_edges(dist, reds, distant_blues, spec.h, w)
            if len(candidates) == 0:
                continue
            a, b = map(int, candidates[rng.integers(len(candidates))])
            structure = gen_structure(l, w)
            positive = Graph(structure.n, structure.edges, tuple(int(c) for c in colors),
                             None, None, 1)
            negative = Graph(structure.n, tuple(sorted(structure.edges + ((a, b),))),
                             positive.colors, None, None, 0)
            return ProxPair(positive, negative, (a, b))
        l = int(rng.integers(spec.l_range[0], spec.l_range[1] + 1))
        w = int(rng.integers(spec.w_range[0], spec.w_range[1] + 1))
    raise GenerationError(
        f"no valid pair after {STRUCTURE_TRIES} structures x {COLORING_TRIES} colorings "
        f"(h={spec.h}, l={l}, w={w}, n_red={n_red})")


def check_label(graph: Graph, h: int) -> bool:
    """True iff every red node has at most two blue nodes within h hops.

    Computed from breadth-first searches on the graph alone, so it is an
    independent check on generator output.
    """
    adj = graph.adjacency()
    for r in range(graph.n):
        if graph.colors[r] != RED:
            continue
        dist = bfs_distances(adj, r, graph.n)
        blues = sum(
            1 for v in range(graph.n)
            if graph.colors[v] == BLUE and dist[v] != UNREACHABLE and 1 <= dist[v] <= h
        )
        if blues > 2:
            return False
    return True


def blue_counts(graph: Graph, h: int) -> list[int]:
    """Per-red-node count of blue nodes within h hops (generator audit)."""
    adj = graph.adjacency()
    out = []
    for r in range(graph.n):
        if graph.colors[r] != RED:
            continue
        dist = bfs_distances(adj, r, graph.n)
        out.append(sum(
            1 for v in range(graph.n)
            if graph.colors[v] == BLUE and dist[v] != UNREACHABLE and 1 <= dist[v] <= h
        ))
    return out


def generate_pairs(spec: ProxSpec) -> list[ProxPair]:
    """All pairs, deterministically derived from ``spec.seed``.

    Pair i draws from its own seed stream, so generation is order-stable
    and could be fanned out across workers.  The first third of pairs has
    one red node, the second two, the last three.
    """
    pairs = []
    third = spec.n_pairs // 3
    for i in range(spec.n_pairs):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, i)))
        l = int(rng.integers(spec.l_range[0], spec.l_range[1] + 1))
        w = int(rng.integers(spec.w_range[0], spec.w_range[1] + 1))
        n_red = 1 + min(i // third, 2)
        pairs.append(gen_pair(spec, l, w, n_red, rng))
    return pairs


def generate_dataset(spec: ProxSpec) -> Dataset:
    graphs = []
    for pair in generate_pairs(spec):
        graphs.append(pair.positive)
        graphs.append(pair.negative)
    meta = {"prox_spec": spec.to_meta(),
            "task": {"kind": "binary-class", "cardinality": 2}}
    return Dataset(graphs, task=Task("binary-class", 2), meta=meta)
