"""splab: a shortest-path message passing laboratory.

Hop decompositions, expressiveness kernels, trainable shortest-path
network layers on a built-in reverse-mode engine, a logic-to-weights
compiler, synthetic long-range benchmarks and an over-squashing probe.
"""

from .graphs import Dataset, FormatError, Graph, Task, validate
from .hops import HopAdjacency, HopIndex, build_hop_adjacency, build_hop_index, diameter

__all__ = [
    "Dataset", "FormatError", "Graph", "Task", "validate",
    "HopAdjacency", "HopIndex", "build_hop_adjacency", "build_hop_index", "diameter",
]

__version__ = "0.1.0"
