import io

import numpy as np
import pytest

from splab import proxgen
from splab.graphs import Graph
from splab.hops import diameter
from splab.jsonl import emit_jsonl, parse_jsonl


def test_structure_counts():
    g = proxgen.gen_structure(3, 3)
    assert g.n == 9 and len(g.edges) == 18


def test_structure_single_edge():
    g = proxgen.gen_structure(2, 1)
    assert g.n == 2 and g.edges == ((0, 1),)


def test_structure_no_intra_level_edges():
    g = proxgen.gen_structure(4, 5)
    for u, v in g.edges:
        assert abs(u // 5 - v // 5) == 1


@pytest.mark.parametrize("l,w", [(3, 3), (5, 4), (7, 2)])
def test_structure_diameter(l, w):
    assert diameter(proxgen.gen_structure(l, w)) == l - 1


def test_structure_diameter_two_levels():
    # same-level nodes are at distance 2 via the adjacent level, so the
    # level-index distance l-1 understates the diameter when l == 2
    assert diameter(proxgen.gen_structure(2, 3)) == 2
    assert diameter(proxgen.gen_structure(2, 1)) == 1


def test_closed_form_distances_match_bfs():
    from splab.hops import build_hop_index
    l, w = 5, 3
    g = proxgen.gen_structure(l, w)
    idx = build_hop_index(g, l, with_distances=True)
    assert np.array_equal(proxgen._structure_distances(l, w), idx.distances)


def _fig3_colors(with_third_blue):
    colors = [2] * 9
    colors[0] = colors[1] = proxgen.BLUE
    colors[4] = proxgen.RED
    if with_third_blue:
        colors[8] = proxgen.BLUE
    return tuple(colors)


def test_check_label_fig3():
    structure = proxgen.gen_structure(3, 3)
    false_graph = Graph(9, structure.edges, _fig3_colors(True))
    true_graph = Graph(9, structure.edges, _fig3_colors(False))
    assert proxgen.check_label(false_graph, 1) is False
    assert proxgen.check_label(true_graph, 1) is True


def test_check_label_vacuous():
    g = Graph(3, ((0, 1), (1, 2)), (2, 2, 2))
    assert proxgen.check_label(g, 3) is True


def test_fig7_scenario():
    # l=4, w=3, h=1: red center, two near blues, one distant blue; the
    # violating edge connects the red to the distant blue directly
    spec = proxgen.ProxSpec(h=1, n_pairs=3, seed=5, l_range=(4, 4), w_range=(3, 3))
    pair = proxgen.gen_pair(spec, 4, 3, 1, np.random.default_rng(2))
    assert proxgen.check_label(pair.positive, 1)
    assert not proxgen.check_label(pair.negative, 1)
    assert proxgen.blue_counts(pair.positive, 1) == [2]
    assert proxgen.blue_counts(pair.negative, 1) == [3]
    red = pair.positive.colors.index(proxgen.RED)
    assert red in pair.added_edge
    other = pair.added_edge[0] if pair.added_edge[1] == red else pair.added_edge[1]
    assert pair.positive.colors[other] == proxgen.BLUE


@pytest.mark.parametrize("h", [1, 3, 5])
def test_generated_pairs_postconditions(h):
    spec = proxgen.ProxSpec(h=h, n_pairs=12, seed=33)
    pairs = proxgen.generate_pairs(spec)
    for pair in pairs:
        assert proxgen.check_label(pair.positive, h)
        assert all(c == 2 for c in proxgen.blue_counts(pair.positive, h))
        assert not proxgen.check_label(pair.negative, h)
        assert pair.positive.colors == pair.negative.colors
        extra = set(pair.negative.edges) - set(pair.positive.edges)
        assert extra == {tuple(sorted(pair.added_edge))}
        assert len(pair.negative.edges) == len(pair.positive.edges) + 1


def test_red_count_partition():
    spec = proxgen.ProxSpec(h=1, n_pairs=9, seed=1)
    pairs = proxgen.generate_pairs(spec)
    reds = [p.positive.colors.count(proxgen.RED) for p in pairs]
    assert reds == [1, 1, 1, 2, 2, 2, 3, 3, 3]


def test_class_balance_and_labels():
    spec = proxgen.ProxSpec(h=1, n_pairs=6, seed=2)
    ds = proxgen.generate_dataset(spec)
    labels = [g.label for g in ds.graphs]
    assert labels == [1, 0] * 6
    assert ds.task.kind == "binary-class"


def test_byte_identical_regeneration():
    spec = proxgen.ProxSpec(h=3, n_pairs=6, seed=77)
    bufs = []
    for _ in range(2):
        buf = io.StringIO()
        emit_jsonl(proxgen.generate_dataset(spec), buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]


def test_header_roundtrip():
    spec = proxgen.ProxSpec(h=1, n_pairs=3, seed=4)
    ds = proxgen.generate_dataset(spec)
    buf = io.StringIO()
    emit_jsonl(ds, buf)
    back = parse_jsonl(io.StringIO(buf.getvalue()))
    assert back.meta["prox_spec"]["h"] == 1
    assert back.meta["prox_spec"]["seed"] == 4
    assert back.task.kind == "binary-class"


def test_spec_validation():
    with pytest.raises(ValueError, match="divisible"):
        proxgen.ProxSpec(h=1, n_pairs=10)
    with pytest.raises(ValueError, match="h must"):
        proxgen.ProxSpec(h=0, n_pairs=3)
    with pytest.raises(ValueError, match="range"):
        proxgen.ProxSpec(h=1, n_pairs=3, l_range=(5, 4))


def test_aux_colors_in_range():
    spec = proxgen.ProxSpec(h=1, n_pairs=3, seed=9)
    for pair in proxgen.generate_pairs(spec):
        assert all(0 <= c < proxgen.N_COLORS for c in pair.positive.colors)
