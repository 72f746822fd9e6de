"""Checked-in counterexample graphs used across the kernel and logic tests.

The set covers the classic separations: a disconnected pair (two 4-cycles
vs one 8-cycle) that only distance statistics tell apart, a connected pair
with equal refinement behavior but Wiener indices 50 vs 56, the triangular
prism vs K3,3 (indistinguishable to both), and a 12-node graph whose root
has hop neighborhoods of sizes 3, 4, 4.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from ..graphs import Graph
from ..jsonl import graph_from_obj


@lru_cache(maxsize=1)
def fixture_graphs() -> dict[str, Graph]:
    out: dict[str, Graph] = {}
    text = resources.files(__package__).joinpath("counterexamples.jsonl").read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        out[obj["name"]] = graph_from_obj(obj, lineno)
    return out


def fixture_graph(name: str) -> Graph:
    return fixture_graphs()[name]
