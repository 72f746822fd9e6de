import io
import json

import numpy as np
import pytest

from splab.fixtures import fixture_graph
from splab.graphs import Dataset, FormatError, Graph, Task, validate
from splab.jsonl import emit_jsonl, graph_from_obj, parse_jsonl
from splab.tu import parse_tu_dataset

from conftest import random_graph


def test_validate_self_loop():
    g = Graph(3, ((0, 1), (2, 2)), (0, 0, 0))
    assert validate(g) == ["self-loop at 2"]


def test_validate_duplicate_edge():
    g = Graph(2, ((0, 1), (1, 0)), (0, 0))
    assert validate(g) == ["duplicate edge (0,1)"]


def test_validate_out_of_range():
    g = Graph(3, ((0, 5),), (0, 0, 0))
    assert any("out of range" in p for p in validate(g))


def test_two_squares_is_valid():
    assert validate(fixture_graph("two_squares")) == []


def test_all_fixtures_valid():
    for name in ("two_squares", "octagon", "wiener50", "wiener56", "prism", "k33", "hop_showcase"):
        assert validate(fixture_graph(name)) == [], name


def test_jsonl_basic_parse():
    ds = parse_jsonl(io.StringIO('{"n":2,"edges":[[0,1]],"colors":[0,0],"label":1}\n'))
    assert len(ds) == 1
    g = ds.graphs[0]
    assert g.n == 2 and g.edges == ((0, 1),) and g.label == 1


def test_jsonl_out_of_range_edge():
    with pytest.raises(FormatError, match="line 1"):
        parse_jsonl(io.StringIO('{"n":3,"edges":[[0,5]],"colors":[0,0,0]}\n'))


def test_jsonl_malformed_line_number():
    stream = io.StringIO('{"n":1,"edges":[],"colors":[0]}\n{oops\n')
    with pytest.raises(FormatError, match="line 2"):
        parse_jsonl(stream)


def test_jsonl_roundtrip_exact(rng):
    graphs = []
    for i in range(30):
        g = random_graph(rng, n_max=8, n_colors=4)
        feats = rng.normal(size=(g.n, 3)) if i % 3 == 0 else None
        label = (float(rng.normal()), float(rng.normal()))
        rels = (tuple(int(r) for r in rng.integers(0, 3, size=len(g.edges)))
                if i % 4 == 0 and g.edges else None)
        graphs.append(Graph(g.n, g.edges, g.colors, rels, feats, label))
    ds = Dataset(graphs, meta={"origin": "test"})
    buf = io.StringIO()
    emit_jsonl(ds, buf)
    back = parse_jsonl(io.StringIO(buf.getvalue()))
    assert back.meta == ds.meta
    assert len(back) == len(ds)
    for a, b in zip(ds.graphs, back.graphs):
        assert a.n == b.n and a.edges == b.edges and a.colors == b.colors
        assert a.relations == b.relations and a.label == b.label
        if a.features is None:
            assert b.features is None
        else:
            assert np.array_equal(a.features, b.features)
    # emit is stable byte for byte
    buf2 = io.StringIO()
    emit_jsonl(back, buf2)
    assert buf.getvalue() == buf2.getvalue()


def test_graph_from_obj_relation_edges():
    g = graph_from_obj({"n": 3, "edges": [[0, 1, 2], [1, 2, 0]], "colors": [0, 1, 0]})
    assert g.relations == (2, 0)


def _write_tu(tmp_path, name, edges, indicator, labels, node_labels=None):
    d = tmp_path / name
    d.mkdir()
    (d / f"{name}_A.txt").write_text("\n".join(f"{u}, {v}" for u, v in edges))
    (d / f"{name}_graph_indicator.txt").write_text("\n".join(str(i) for i in indicator))
    (d / f"{name}_graph_labels.txt").write_text("\n".join(str(l) for l in labels))
    if node_labels is not None:
        (d / f"{name}_node_labels.txt").write_text("\n".join(str(l) for l in node_labels))
    return str(d)


def test_tu_symmetric_pair_collapse(tmp_path):
    path = _write_tu(tmp_path, "TINY", [(1, 2), (2, 1)], [1, 1], [1])
    ds = parse_tu_dataset(path)
    assert len(ds) == 1
    assert ds.graphs[0].n == 2
    assert ds.graphs[0].edges == ((0, 1),)


def test_tu_graph_partition(tmp_path):
    path = _write_tu(tmp_path, "TWO", [(1, 2)], [1, 1, 2], [1, 2])
    ds = parse_tu_dataset(path)
    assert [g.n for g in ds.graphs] == [2, 1]


def test_tu_node_labels_and_classes(tmp_path):
    path = _write_tu(tmp_path, "LBL", [(1, 2), (3, 4)], [1, 1, 2, 2], [6, 2], [5, 5, 7, 5])
    ds = parse_tu_dataset(path)
    assert ds.graphs[0].colors == (5, 5)
    assert ds.graphs[1].colors == (7, 5)
    # labels remapped to 0-based class ids in sorted raw order
    assert [g.label for g in ds.graphs] == [1, 0]
    assert ds.meta["raw_labels"] == [2, 6]


def test_tu_missing_file_names_it(tmp_path):
    d = tmp_path / "BAD"
    d.mkdir()
    (d / "BAD_A.txt").write_text("1, 2")
    with pytest.raises(FormatError, match="graph_indicator"):
        parse_tu_dataset(str(d))


def test_tu_unknown_node_has_line_number(tmp_path):
    path = _write_tu(tmp_path, "OOB", [(1, 2), (1, 9)], [1, 1], [1])
    with pytest.raises(FormatError, match="line 2"):
        parse_tu_dataset(path)


def test_tu_order_insensitive(tmp_path, rng):
    edges = [(1, 2), (2, 3), (3, 1), (4, 5)]
    indicator = [1, 1, 1, 2, 2]
    p1 = _write_tu(tmp_path, "ORD1", edges, indicator, [1, 2])
    perm = [edges[i] for i in rng.permutation(len(edges))]
    p2 = _write_tu(tmp_path, "ORD2", perm, indicator, [1, 2])
    d1, d2 = parse_tu_dataset(p1), parse_tu_dataset(p2)
    for a, b in zip(d1.graphs, d2.graphs):
        assert a.edges == b.edges


ENZYMES_DIR = "/root/datasets/ENZYMES"


@pytest.mark.skipif(not __import__("os").path.isdir(ENZYMES_DIR),
                    reason="ENZYMES dataset not present")
def test_enzymes_statistics():
    ds = parse_tu_dataset(ENZYMES_DIR)
    assert len(ds) == 600
    assert ds.task.cardinality == 6
    mean_nodes = sum(g.n for g in ds.graphs) / len(ds)
    assert abs(mean_nodes - 32.6) < 0.5


def test_dataset_split_validation():
    graphs = [Graph(1, (), (0,)) for _ in range(4)]
    with pytest.raises(ValueError, match="overlap"):
        Dataset(graphs, task=Task("binary-class", 2), splits=[([0, 1], [1], [2])])
    with pytest.raises(ValueError, match="range"):
        Dataset(graphs, task=Task("binary-class", 2), splits=[([0], [1], [9])])


def test_relabel_preserves_structure(rng):
    g = random_graph(rng, n_max=8, n_colors=3)
    perm = list(rng.permutation(g.n))
    h = g.relabeled(perm)
    assert sorted(len(a) for a in g.adjacency()) == sorted(len(a) for a in h.adjacency())
    assert sorted(g.colors) == sorted(h.colors)
