"""Over-squashing probes.

Quantifies how much a distant node's initial state can influence a node's
final state: normalized-adjacency powers give the analytic decay factor,
and exact input-output Jacobians (one backward pass per output coordinate)
give the measured sensitivity through real or probe layers.

The probe model aggregates with the normalized hop adjacencies and applies
a 1-Lipschitz elementwise map, so its Jacobian is provably bounded by the
corresponding adjacency-power entry; trained layers are reported without a
bound claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .graphs import Graph
from .hops import HopAdjacency, build_hop_adjacency, build_hop_index
from .models import GraphBatch, GraphModel, hops_needed, make_batch, needs_distances, prepare_graph


def adjacency_power_entry(hop_adj: HopAdjacency, hop: int, exponent: int,
                          u: int, v: int) -> float:
    """Entry ((normalized A_hop)^exponent)[u, v], computed densely."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    dense = hop_adj.normalized_dense(hop)
    return float(np.linalg.matrix_power(dense, exponent)[u, v])


@dataclass(frozen=True)
class SensitivityRow:
    """One measured (source, target) sensitivity with optional bound."""

    r: int
    model: str
    k: int
    T: int
    norm: float
    bound: Optional[float] = None

    def csv(self) -> str:
        bound = "" if self.bound is None else repr(self.bound)
        return f"{self.r},{self.model},{self.k},{self.T},{self.norm!r},{bound}"


CSV_HEADER = "r,model,k,T,norm,bound"


def jacobian_norm(forward: Callable[[Tensor], Tensor], h0: np.ndarray,
                  u: int, v: int) -> float:
    """Frobenius norm of d(out[u]) / d(h0[v]) through ``forward``.

    Structurally disconnected pairs give exactly 0.0 (no gradient path, not
    a small float).
    """
    x = Tensor(np.array(h0, dtype=np.float64), requires_grad=True)
    with Tape() as tape:
        out = forward(x)
    d_out = out.data.shape[1]
    jac = np.zeros((d_out, x.data.shape[1]))
    for j in range(d_out):
        tape.clear_grads()
        seed = np.zeros_like(out.data)
        seed[u, j] = 1.0
        tape.backward(out, seed)
        if x.grad is not None:
            jac[j] = x.grad[v]
    return float(np.linalg.norm(jac))


class ProbeModel:
    """Normalized-adjacency sum aggregation with a 1-Lipschitz map.

    ``k=1`` is the classical message-passing probe; larger ``k`` sums the
    per-hop normalized adjacencies.  With the identity map the Jacobian
    equals the adjacency coefficients exactly; with tanh it is bounded by
    them (alpha = beta = 1).
    """

    def __init__(self, k: int, T: int, activation: str = "tanh"):
        if activation not in ("tanh", "identity"):
            raise ValueError("activation must be 'tanh' or 'identity'")
        self.k = k
        self.T = T
        self.activation = activation
        self.name = "mpnn" if k == 1 else "spn"

    def forward_fn(self, graph: Graph) -> Callable[[Tensor], Tensor]:
        hop_adj = build_hop_adjacency(build_hop_index(graph, self.k))
        mats = [Tensor(hop_adj.normalized_dense(i)) for i in range(1, self.k + 1)]

        def forward(x: Tensor) -> Tensor:
            h = x
            for _ in range(self.T):
                agg = ad.matmul(mats[0], h)
                for m in mats[1:]:
                    agg = ad.add(agg, ad.matmul(m, h))
                h = ad.tanh(agg) if self.activation == "tanh" else agg
            return h
        return forward

    def bound(self, graph: Graph, u: int, v: int) -> Optional[float]:
        """(alpha beta)^q (A_hat)^q_{uv} where analyzed; None otherwise."""
        hop_adj = build_hop_adjacency(build_hop_index(graph, self.k))
        if self.k == 1:
            return adjacency_power_entry(hop_adj, 1, self.T, u, v)
        if self.T == 1:
            index = build_hop_index(graph, self.k, with_distances=True)
            r = int(index.distances[u, v])
            if r < 1 or r > self.k:
                return 0.0
            return float(hop_adj.normalized_dense(r)[u, v])
        return None


def empirical_jacobian(model, graph: Graph, u: int, v: int,
                       h0: Optional[np.ndarray] = None) -> SensitivityRow:
    """Measured sensitivity of node u's final state to node v's input.

    ``model`` is a :class:`ProbeModel` or a :class:`GraphModel`; probe rows
    carry the analytic bound.
    """
    index = build_hop_index(graph, 1, with_distances=True)
    dist = index.distances[u, v]
    r = int(dist) if dist >= 0 else -1
    if isinstance(model, ProbeModel):
        if h0 is None:
            h0 = np.zeros((graph.n, 1))
        norm = jacobian_norm(model.forward_fn(graph), h0, u, v)
        return SensitivityRow(r, model.name, model.k, model.T, norm,
                              model.bound(graph, u, v))
    batch = make_batch([prepare_graph(graph, hops_needed(model.kind, model.k),
                                      with_distances=needs_distances(model.kind))])
    if h0 is None:
        h0 = model.initial_states(batch).data
    forward = lambda x: model.run_layers(x, batch, training=False)[-1]
    norm = jacobian_norm(forward, h0, u, v)
    return SensitivityRow(r, model.kind, model.k, model.n_layers, norm, None)


def layered_graph(l: int, w: int) -> Graph:
    from .proxgen import gen_structure
    return gen_structure(l, w)


def decay_curve(l: int, w: int, k: int, distances: Optional[list[int]] = None,
                activation: str = "tanh") -> list[SensitivityRow]:
    """Paired MPNN(T=r) vs SPN(k, T=ceil(r/k)) sensitivities on the layered
    graph, measured between a level-0 node and a level-r node."""
    graph = layered_graph(l, w)
    if distances is None:
        distances = list(range(1, l))
    rows = []
    for r in distances:
        u, v = 0, r * w
        rows.append(empirical_jacobian(ProbeModel(1, r, activation), graph, u, v))
        rows.append(empirical_jacobian(ProbeModel(k, math.ceil(r / k), activation), graph, u, v))
    return rows
