"""Trainable graph layers and model assembly.

All layers operate on a batch tensor holding the node states of every graph
in the batch stacked along axis 0; hop aggregation runs over precomputed
per-hop edge arrays, so the shortest-path work is paid once per graph.
Attention layers fall back to per-graph dense attention, which is fine at
the graph sizes this package targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import Graph
from .hops import UNREACHABLE, build_hop_index
from .nn import MLP, BatchNorm, Embedding, Linear, Module, uniform_init

ALPHA_PIN = 1e4  # logit magnitude that makes softmax exactly one-hot in float64


# ---------------------------------------------------------------------------
# batch preparation


@dataclass
class GraphCache:
    """Per-graph precomputation reused across epochs."""

    n: int
    colors: np.ndarray
    degrees: np.ndarray
    hop_edges: list[tuple[np.ndarray, np.ndarray]]          # per hop, sorted by dst
    rel_edges: list[tuple[np.ndarray, np.ndarray]]          # per relation, hop-1 only
    gcn_edges: tuple[np.ndarray, np.ndarray, np.ndarray]    # src, dst, weight
    label: object
    distances: Optional[np.ndarray] = None


def prepare_graph(graph: Graph, k: int, n_relations: int = 1,
                  with_distances: bool = False) -> GraphCache:
    index = build_hop_index(graph, k, with_distances=with_distances)
    n = graph.n
    hop_edges = []
    for i in range(1, k + 1):
        src, dst = [], []
        for u in range(n):
            for v in index.hop(u, i):
                src.append(v)
                dst.append(u)
        hop_edges.append((np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)))

    rel_adj: list[list[list[int]]] = [[[] for _ in range(n)] for _ in range(n_relations)]
    rels = graph.relations if graph.relations is not None else (0,) * len(graph.edges)
    for (u, v), r in zip(graph.edges, rels):
        rel_adj[r][u].append(v)
        rel_adj[r][v].append(u)
    rel_edges = []
    for r in range(n_relations):
        src, dst = [], []
        for u in range(n):
            for v in sorted(rel_adj[r][u]):
                src.append(v)
                dst.append(u)
        rel_edges.append((np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)))

    deg = np.asarray(graph.degrees(), dtype=np.int64)
    dtil = deg.astype(np.float64) + 1.0
    gsrc, gdst = [], []
    for u in range(n):
        for v in index.hop(u, 1):
            gsrc.append(v)
            gdst.append(u)
        gsrc.append(u)
        gdst.append(u)
    gsrc_a = np.asarray(gsrc, dtype=np.int64)
    gdst_a = np.asarray(gdst, dtype=np.int64)
    gw = 1.0 / np.sqrt(dtil[gsrc_a] * dtil[gdst_a])

    return GraphCache(
        n=n,
        colors=np.asarray(graph.colors, dtype=np.int64),
        degrees=deg,
        hop_edges=hop_edges,
        rel_edges=rel_edges,
        gcn_edges=(gsrc_a, gdst_a, gw),
        label=graph.label,
        distances=index.distances,
    )


@dataclass
class GraphBatch:
    n_total: int
    n_graphs: int
    colors: np.ndarray
    degrees: np.ndarray
    graph_seg: np.ndarray
    sizes: np.ndarray
    slices: list[tuple[int, int]]
    hop_edges: list[tuple[np.ndarray, np.ndarray]]
    rel_edges: list[tuple[np.ndarray, np.ndarray]]
    gcn_edges: tuple[np.ndarray, np.ndarray, np.ndarray]
    labels: list
    distances: list[Optional[np.ndarray]] = field(default_factory=list)
    # CSR aggregation operators (out[dst] += w * values[src]); all symmetric
    hop_ops: list = field(default_factory=list)
    rel_ops: list = field(default_factory=list)
    gcn_op: object = None


def _edge_csr(src: np.ndarray, dst: np.ndarray, n: int, weights=None):
    data = np.ones(len(src)) if weights is None else weights
    return sp.csr_matrix((data, (dst, src)), shape=(n, n))


def make_batch(caches: Sequence[GraphCache]) -> GraphBatch:
    sizes = np.asarray([c.n for c in caches], dtype=np.int64)
    offsets = np.zeros(len(caches) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    k = len(caches[0].hop_edges)
    n_rel = len(caches[0].rel_edges)

    def merge(pick) -> tuple[np.ndarray, np.ndarray]:
        src = np.concatenate([pick(c)[0] + offsets[i] for i, c in enumerate(caches)])
        dst = np.concatenate([pick(c)[1] + offsets[i] for i, c in enumerate(caches)])
        return src, dst

    hop_edges = [merge(lambda c, i=i: c.hop_edges[i]) for i in range(k)]
    rel_edges = [merge(lambda c, r=r: c.rel_edges[r]) for r in range(n_rel)]
    gsrc = np.concatenate([c.gcn_edges[0] + offsets[i] for i, c in enumerate(caches)])
    gdst = np.concatenate([c.gcn_edges[1] + offsets[i] for i, c in enumerate(caches)])
    gw = np.concatenate([c.gcn_edges[2] for c in caches])
    n_total = int(offsets[-1])
    return GraphBatch(
        n_total=n_total,
        n_graphs=len(caches),
        colors=np.concatenate([c.colors for c in caches]),
        degrees=np.concatenate([c.degrees for c in caches]),
        graph_seg=np.repeat(np.arange(len(caches), dtype=np.int64), sizes),
        sizes=sizes,
        slices=[(int(offsets[i]), int(offsets[i + 1])) for i in range(len(caches))],
        hop_edges=hop_edges,
        rel_edges=rel_edges,
        gcn_edges=(gsrc, gdst, gw),
        labels=[c.label for c in caches],
        distances=[c.distances for c in caches],
        hop_ops=[_edge_csr(src, dst, n_total) for src, dst in hop_edges],
        rel_ops=[_edge_csr(src, dst, n_total) for src, dst in rel_edges],
        gcn_op=_edge_csr(gsrc, gdst, n_total, gw),
    )


# ---------------------------------------------------------------------------
# message passing layers


class SpnLayer(Module):
    """Hop-weighted sum aggregation with a simplex over hop weights.

    Pre-activation is (1 + eps) h_u + sum_i alpha_i sum_{v in N_i(u)} h_v
    with alpha = softmax(logits); the combine is a two-layer MLP whose
    linear maps are each followed by batch norm and ReLU.
    """

    def __init__(self, dim: int, k: int, rng: np.random.Generator):
        self.k = k
        self.eps = Tensor(np.zeros(()), requires_grad=True)
        self.alpha_logits = Tensor(np.zeros(k), requires_grad=True)
        self.mlp = MLP(dim, dim, rng)

    def alphas(self) -> Tensor:
        return ad.softmax(self.alpha_logits, axis=-1)

    def pin_alpha(self, hop: int) -> None:
        """Force alpha exactly one-hot on ``hop`` (1-based)."""
        logits = np.full(self.k, -ALPHA_PIN)
        logits[hop - 1] = ALPHA_PIN
        self.alpha_logits.data = logits

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        a = self.alphas()
        pre = ad.mul(h, ad.add_const(self.eps, 1.0))
        for i in range(self.k):
            msg = ad.spmm(batch.hop_ops[i], h)
            pre = ad.add(pre, ad.mul(msg, ad.gather0(a, [i])))
        return self.mlp(pre, training)


class GinLayer(Module):
    def __init__(self, dim: int, rng: np.random.Generator):
        self.eps = Tensor(np.zeros(()), requires_grad=True)
        self.mlp = MLP(dim, dim, rng)

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        pre = ad.add(ad.mul(h, ad.add_const(self.eps, 1.0)),
                     ad.spmm(batch.hop_ops[0], h))
        return self.mlp(pre, training)


class GcnLayer(Module):
    def __init__(self, dim: int, rng: np.random.Generator):
        self.lin = Linear(dim, dim, rng)
        self.bn = BatchNorm(dim)

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        z = ad.spmm(batch.gcn_op, h)
        return ad.relu(self.bn(self.lin(z), training))


class GatLayer(Module):
    """Single-head additive attention over the direct neighborhood."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.weight = Tensor(uniform_init(rng, (dim, dim), dim), requires_grad=True)
        self.att_src = Tensor(uniform_init(rng, (dim, 1), dim), requires_grad=True)
        self.att_dst = Tensor(uniform_init(rng, (dim, 1), dim), requires_grad=True)
        self.bn = BatchNorm(dim)

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        wh = ad.matmul(h, self.weight)
        outs = []
        for gi, (lo, hi) in enumerate(batch.slices):
            hg = ad.slice_rows(wh, lo, hi)
            n = hi - lo
            s_dst = ad.matmul(hg, self.att_dst)      # score term of the updating node
            s_src = ad.matmul(hg, self.att_src)      # score term of the neighbor
            scores = ad.leaky_relu(ad.add(s_dst, ad.transpose(s_src)))
            mask = np.full((n, n), -1e30)
            np.fill_diagonal(mask, 0.0)
            src, dst = batch.hop_edges[0]
            inside = (dst >= lo) & (dst < hi)
            mask[dst[inside] - lo, src[inside] - lo] = 0.0
            attn = ad.softmax(ad.add(scores, Tensor(mask)), axis=-1)
            outs.append(ad.matmul(attn, hg))
        return ad.relu(self.bn(ad.concat0(outs), training))


class RspnLayer(Module):
    """Relational hop aggregation: per-relation transforms at hop 1, one
    shared transform for hops 2..k, and a self transform.  The update is the
    bare weighted sum (no trailing combine)."""

    def __init__(self, dim: int, k: int, n_relations: int, rng: np.random.Generator):
        self.k = k
        self.n_relations = n_relations
        self.eps = Tensor(np.zeros(()), requires_grad=True)
        self.alpha_logits = Tensor(np.zeros(k), requires_grad=True)
        self.mlp_self = MLP(dim, dim, rng)
        self.mlp_rel = [MLP(dim, dim, rng) for _ in range(n_relations)]
        self.mlp_hop = MLP(dim, dim, rng)

    def alphas(self) -> Tensor:
        return ad.softmax(self.alpha_logits, axis=-1)

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        if len(batch.rel_edges) != self.n_relations:
            raise ValueError(
                f"batch has {len(batch.rel_edges)} relations, layer expects {self.n_relations}")
        a = self.alphas()
        out = ad.mul(self.mlp_self(h, training), ad.add_const(self.eps, 1.0))
        hop1 = None
        for r in range(self.n_relations):
            msg = ad.spmm(batch.rel_ops[r], self.mlp_rel[r](h, training))
            hop1 = msg if hop1 is None else ad.add(hop1, msg)
        out = ad.add(out, ad.mul(hop1, ad.gather0(a, [0])))
        if self.k > 1:
            hh = self.mlp_hop(h, training)
            for i in range(1, self.k):
                msg = ad.spmm(batch.hop_ops[i], hh)
                out = ad.add(out, ad.mul(msg, ad.gather0(a, [i])))
        return out


class GraphormerLiteLayer(Module):
    """Single-head scaled dot-product attention over all node pairs with a
    learned scalar bias per shortest-path distance (clamped at max_dist;
    unreachable pairs read the max_dist bucket, so disconnected nodes still
    attend)."""

    def __init__(self, dim: int, max_dist: int, rng: np.random.Generator):
        self.max_dist = max_dist
        self.wq = Tensor(uniform_init(rng, (dim, dim), dim), requires_grad=True)
        self.wk = Tensor(uniform_init(rng, (dim, dim), dim), requires_grad=True)
        self.wv = Tensor(uniform_init(rng, (dim, dim), dim), requires_grad=True)
        self.wo = Tensor(uniform_init(rng, (dim, dim), dim), requires_grad=True)
        self.dist_bias = Tensor(np.zeros(max_dist + 1), requires_grad=True)

    def _bias_index(self, dist: np.ndarray) -> np.ndarray:
        return np.where(dist == UNREACHABLE, self.max_dist,
                        np.minimum(dist, self.max_dist))

    def __call__(self, h: Tensor, batch: GraphBatch, training: bool) -> Tensor:
        dim = h.data.shape[1]
        outs = []
        for gi, (lo, hi) in enumerate(batch.slices):
            if batch.distances[gi] is None:
                raise ValueError("graphormer-lite needs distance tables; prepare with distances")
            hg = ad.slice_rows(h, lo, hi)
            q = ad.matmul(hg, self.wq)
            kk = ad.matmul(hg, self.wk)
            v = ad.matmul(hg, self.wv)
            scores = ad.scale(ad.matmul(q, ad.transpose(kk)), 1.0 / np.sqrt(dim))
            bias = ad.gather0(self.dist_bias, self._bias_index(batch.distances[gi]))
            attn = ad.softmax(ad.add(scores, bias), axis=-1)
            outs.append(ad.matmul(attn, v))
        return ad.matmul(ad.concat0(outs), self.wo)


# ---------------------------------------------------------------------------
# pooling


class PoolingHead(Module):
    """Graph-level readout.

    ``mean`` / ``sum`` aggregate the final node states.  ``layerwise``
    implements sum_i sum_u W_i h_u^{(i-1)} with exactly one linear map per
    message passing layer (W_i applied to the state entering layer i).
    """

    # node-summed readouts reach O(n) magnitudes; a small map init keeps
    # initial logits O(1) so the softmax starts unsaturated
    MAP_INIT_SCALE = 0.01

    def __init__(self, mode: str, dim: int, out_dim: int, n_layers: int,
                 rng: np.random.Generator):
        if mode not in ("mean", "sum", "layerwise"):
            raise ValueError(f"unknown pooling mode: {mode}")
        self.mode = mode
        self.maps: list[Tensor] = []
        if mode == "layerwise":
            self.maps = [Tensor(self.MAP_INIT_SCALE * uniform_init(rng, (dim, out_dim), dim),
                                requires_grad=True)
                         for _ in range(n_layers)]

    def __call__(self, history: list[Tensor], batch: GraphBatch) -> Tensor:
        if self.mode == "layerwise":
            out = None
            for i, w in enumerate(self.maps):
                pooled = ad.segment_sum(history[i], batch.graph_seg, batch.n_graphs)
                term = ad.matmul(pooled, w)
                out = term if out is None else ad.add(out, term)
            return out
        pooled = ad.segment_sum(history[-1], batch.graph_seg, batch.n_graphs)
        if self.mode == "mean":
            pooled = ad.mul(pooled, Tensor(1.0 / batch.sizes[:, None]))
        return pooled


# ---------------------------------------------------------------------------
# full models


MODEL_KINDS = ("spn", "rspn", "graphormer-lite", "gin-baseline", "gcn-baseline", "gat-baseline")


class GraphModel(Module):
    def __init__(self, kind: str, n_colors: int, dim: int, k: int, n_layers: int,
                 out_dim: int, pooling: str, dropout: float, rng: np.random.Generator,
                 n_relations: int = 1, max_degree: int = 128):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind: {kind}")
        self.kind = kind
        self.k = k
        self.n_layers = n_layers
        self.dropout = dropout
        self.max_degree = max_degree
        self.embedding = Embedding(n_colors, dim, rng)
        self.centrality: Optional[Embedding] = None
        if kind == "spn":
            self.layers = [SpnLayer(dim, k, rng) for _ in range(n_layers)]
        elif kind == "rspn":
            self.layers = [RspnLayer(dim, k, n_relations, rng) for _ in range(n_layers)]
        elif kind == "gin-baseline":
            self.layers = [GinLayer(dim, rng) for _ in range(n_layers)]
        elif kind == "gcn-baseline":
            self.layers = [GcnLayer(dim, rng) for _ in range(n_layers)]
        elif kind == "gat-baseline":
            self.layers = [GatLayer(dim, rng) for _ in range(n_layers)]
        else:
            self.centrality = Embedding(max_degree + 1, dim, rng)
            self.layers = [GraphormerLiteLayer(dim, k + 1, rng) for _ in range(n_layers)]
        self.pooling = PoolingHead(pooling, dim, out_dim if pooling == "layerwise" else dim,
                                   n_layers, rng)
        self.head: Optional[Linear] = None
        if pooling != "layerwise":
            self.head = Linear(dim, out_dim, rng)

    def initial_states(self, batch: GraphBatch) -> Tensor:
        h = self.embedding(batch.colors)
        if self.centrality is not None:
            h = ad.add(h, self.centrality(np.clip(batch.degrees, 0, self.max_degree)))
        return h

    def run_layers(self, h: Tensor, batch: GraphBatch, training: bool = False,
                   rng: Optional[np.random.Generator] = None,
                   limit: Optional[int] = None) -> list[Tensor]:
        history = [h]
        for layer in self.layers[:limit]:
            h = layer(h, batch, training)
            if rng is not None:
                h = ad.dropout(h, self.dropout, rng, training)
            history.append(h)
        return history

    def forward(self, batch: GraphBatch, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        # layerwise pooling reads the states entering each layer, so the
        # last layer's output is dead code and is never computed
        limit = self.n_layers - 1 if self.pooling.mode == "layerwise" else None
        history = self.run_layers(self.initial_states(batch), batch, training, rng, limit)
        out = self.pooling(history, batch)
        if self.head is not None:
            out = self.head(out)
        return out

    def alpha_vectors(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            if isinstance(layer, (SpnLayer, RspnLayer)):
                out.append(np.array(layer.alphas().data))
        return out


def needs_distances(kind: str) -> bool:
    return kind == "graphormer-lite"


def hops_needed(kind: str, k: int) -> int:
    if kind in ("gin-baseline", "gcn-baseline", "gat-baseline"):
        return 1
    return k


# ---------------------------------------------------------------------------
# checkpoints: numpy .npz container with named arrays plus a JSON meta entry


def save_checkpoint(model: GraphModel, path, extra_meta: Optional[dict] = None) -> None:
    meta = {
        "format": "splab-checkpoint-v1",
        "kind": model.kind,
        "n_colors": int(model.embedding.table.data.shape[0]),
        "dim": int(model.embedding.table.data.shape[1]),
        "k": model.k,
        "n_layers": model.n_layers,
        "pooling": model.pooling.mode,
        "dropout": model.dropout,
        "max_degree": model.max_degree,
        "n_relations": len(model.layers[0].mlp_rel) if model.kind == "rspn" else 1,
        "out_dim": int(model.head.weight.data.shape[1]) if model.head is not None
                   else int(model.pooling.maps[0].data.shape[1]),
    }
    if extra_meta:
        meta["extra"] = extra_meta
    arrays = model.named_arrays()
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[GraphModel, dict]:
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(bytes(arrays.pop("__meta__")).decode("utf-8"))
    if meta.get("format") != "splab-checkpoint-v1":
        raise ValueError("not a splab checkpoint")
    model = GraphModel(meta["kind"], meta["n_colors"], meta["dim"], meta["k"],
                       meta["n_layers"], meta["out_dim"], meta["pooling"], meta["dropout"],
                       np.random.default_rng(0), meta["n_relations"], meta["max_degree"])
    model.load_arrays(arrays)
    return model, meta
