import numpy as np
import pytest

from splab.graphs import Graph


def random_graph(rng: np.random.Generator, n_max: int = 10, n_colors: int = 1,
                 p: float = 0.35, n_min: int = 2) -> Graph:
    n = int(rng.integers(n_min, n_max + 1))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v))
    colors = tuple(int(c) for c in rng.integers(0, n_colors, size=n))
    return Graph(n, tuple(edges), colors)


def floyd_warshall(graph: Graph) -> np.ndarray:
    """Independent all-pairs shortest path oracle (inf for unreachable)."""
    n = graph.n
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in graph.edges:
        dist[u, v] = dist[v, u] = 1.0
    for m in range(n):
        dist = np.minimum(dist, dist[:, m:m + 1] + dist[m:m + 1, :])
    return dist


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
