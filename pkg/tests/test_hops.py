import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splab.fixtures import fixture_graph
from splab.graphs import Graph
from splab.hops import UNREACHABLE, build_hop_adjacency, build_hop_index, diameter

from conftest import floyd_warshall, random_graph


def cycle(n):
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)), (0,) * n)


def test_path_hops():
    g = Graph(3, ((0, 1), (1, 2)), (0, 0, 0))
    idx = build_hop_index(g, 2)
    assert idx.hop(0, 1) == (1,)
    assert idx.hop(0, 2) == (2,)
    assert idx.infinity_set[0] == ()


def test_two_squares_buckets():
    idx = build_hop_index(fixture_graph("two_squares"), 2)
    for u in range(8):
        assert len(idx.hop(u, 1)) == 2
        assert len(idx.hop(u, 2)) == 1
        assert len(idx.infinity_set[u]) == 4


def test_hop_showcase_white_node_hop_sizes():
    idx = build_hop_index(fixture_graph("hop_showcase"), 3)
    assert idx.hop_sizes(0) == (3, 4, 4)


def test_truncation_excludes_far_nodes():
    g = Graph(4, ((0, 1), (1, 2), (2, 3)), (0,) * 4)
    idx = build_hop_index(g, 2)
    buckets = set(idx.hop(0, 1)) | set(idx.hop(0, 2)) | set(idx.infinity_set[0])
    assert 3 not in buckets  # distance 3 > k, reachable but unbucketed


def test_partition_property(rng):
    for _ in range(50):
        g = random_graph(rng, n_max=10)
        idx = build_hop_index(g, max(g.n - 1, 1))
        for u in range(g.n):
            parts = [set(idx.hop(u, i)) for i in range(1, idx.k + 1)]
            parts.append(set(idx.infinity_set[u]))
            union = set()
            total = 0
            for p in parts:
                union |= p
                total += len(p)
            assert total == len(union), "buckets overlap"
            assert union | {u} == set(range(g.n))


def test_oracle_equivalence(rng):
    for _ in range(200):
        g = random_graph(rng, n_max=12, p=0.3)
        idx = build_hop_index(g, max(g.n - 1, 1), with_distances=True)
        oracle = floyd_warshall(g)
        mine = np.where(idx.distances == UNREACHABLE, np.inf, idx.distances)
        assert np.array_equal(mine, oracle)


def test_distance_symmetry(rng):
    for _ in range(30):
        g = random_graph(rng, n_max=10)
        idx = build_hop_index(g, 3, with_distances=True)
        assert np.array_equal(idx.distances, idx.distances.T)


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_hop_symmetry_property(seed):
    g = random_graph(np.random.default_rng(seed), n_max=9)
    idx = build_hop_index(g, 4)
    for u in range(g.n):
        for i in range(1, 5):
            for v in idx.hop(u, i):
                assert u in idx.hop(v, i)


def test_hop1_is_adjacency(rng):
    g = random_graph(rng, n_max=9)
    idx = build_hop_index(g, 1)
    adj = g.adjacency()
    for u in range(g.n):
        assert list(idx.hop(u, 1)) == adj[u]


def test_single_edge_normalized():
    g = Graph(2, ((0, 1),), (0, 0))
    ha = build_hop_adjacency(build_hop_index(g, 1))
    assert np.allclose(ha.normalized_dense(1), 0.5)


def test_isolated_node_normalized():
    g = Graph(1, (), (0,))
    ha = build_hop_adjacency(build_hop_index(g, 1))
    assert np.allclose(ha.normalized_dense(1), [[1.0]])


def test_cycle8_hop2_rows():
    ha = build_hop_adjacency(build_hop_index(cycle(8), 2))
    a2 = ha.normalized_dense(2)
    for row in a2:
        nz = row[row > 0]
        assert len(nz) == 3
        assert np.allclose(nz, 1 / 3)


def test_normalized_formula_entrywise(rng):
    for _ in range(20):
        g = random_graph(rng, n_max=9)
        idx = build_hop_index(g, 3)
        ha = build_hop_adjacency(idx)
        for i in range(1, 4):
            a = ha.adjacency[i - 1].to_dense()
            dtil = a.sum(axis=1) + 1.0
            expected = (a + np.eye(g.n)) / np.sqrt(np.outer(dtil, dtil))
            assert np.abs(ha.normalized_dense(i) - expected).max() < 1e-12
            # support matches (A_i + I) exactly and degrees agree
            assert np.array_equal(ha.normalized_dense(i) > 0, (a + np.eye(g.n)) > 0)
            assert np.array_equal(ha.degrees[i - 1], dtil)


def test_normalized_row_sum_bound(rng):
    for _ in range(20):
        g = random_graph(rng, n_max=9)
        ha = build_hop_adjacency(build_hop_index(g, 2))
        for i in (1, 2):
            rows = ha.normalized_dense(i).sum(axis=1)
            limit = np.sqrt(ha.degrees[i - 1])
            assert (rows > 0).all()
            assert (rows <= limit + 1e-12).all()


def test_diameter_cycle8():
    assert diameter(cycle(8)) == 4


def test_diameter_disconnected():
    assert diameter(fixture_graph("two_squares")) == math.inf


def test_diameter_i1():
    assert diameter(fixture_graph("wiener50")) == 3


def test_diameter_oracle(rng):
    for _ in range(40):
        g = random_graph(rng, n_max=9)
        oracle = floyd_warshall(g)
        want = oracle.max()
        got = diameter(g)
        assert (got == math.inf and want == np.inf) or got == want


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        build_hop_index(Graph(1, (), (0,)), 0)
