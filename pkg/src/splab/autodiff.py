"""Minimal dense-tensor reverse-mode differentiation.

Operations compute eagerly on numpy arrays and, when a :class:`Tape` is
active and some input requires gradients, record themselves on it.  The
tape is a Wengert list: execution order is a topological order, so the
backward sweep walks it once in reverse and accumulates gradients into
``Tensor.grad`` (fan-out sums automatically).

A tape is confined to one thread; independent runs on separate threads do
not share state.  Everything defaults to 64-bit floats; passing float32
data keeps it 32-bit.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np


class GradCheckError(RuntimeError):
    """Non-finite values encountered while checking gradients."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype != np.float32 and arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


_STATE = threading.local()


def _active_tape() -> Optional["Tape"]:
    return getattr(_STATE, "tape", None)


class _Op:
    __slots__ = ("out", "parents")

    def __init__(self, out: Tensor, parents: list[tuple[Tensor, Callable[[np.ndarray], np.ndarray]]]):
        self.out = out
        self.parents = parents


class Tape:
    """Recorded primitive operations in execution order."""

    def __init__(self):
        self.ops: list[_Op] = []

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise RuntimeError("a Tape is already active on this thread")
        _STATE.tape = self
        return self

    def __exit__(self, *exc):
        _STATE.tape = None
        return False

    def record(self, out: Tensor, parents) -> None:
        self.ops.append(_Op(out, parents))

    def backward(self, out: Tensor, seed: Optional[np.ndarray] = None) -> None:
        """Accumulate d(out)/d(leaf) into every recorded tensor's ``grad``."""
        if seed is None:
            seed = np.ones_like(out.data)
        out.accumulate(np.asarray(seed, dtype=out.data.dtype))
        for op in reversed(self.ops):
            g = op.out.grad
            if g is None:
                continue
            for parent, vjp in op.parents:
                if parent.requires_grad:
                    parent.accumulate(vjp(g))

    def clear_grads(self) -> None:
        for op in self.ops:
            op.out.grad = None
            for parent, _ in op.parents:
                parent.grad = None


def _maybe_record(out: Tensor, parents) -> Tensor:
    tape = _active_tape()
    tracked = [(p, vjp) for p, vjp in parents if p.requires_grad]
    if tape is not None and tracked:
        out.requires_grad = True
        tape.record(out, tracked)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / linear primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)
    return _maybe_record(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(g, b.data.shape)),
    ])


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)
    return _maybe_record(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(-g, b.data.shape)),
    ])


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)
    return _maybe_record(out, [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
    ])


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _maybe_record(out, [(a, lambda g: -g)])


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c)
    return _maybe_record(out, [(a, lambda g: g * c)])


def add_const(a: Tensor, c) -> Tensor:
    out = Tensor(a.data + c)
    return _maybe_record(out, [(a, lambda g: _unbroadcast(g, a.data.shape))])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data)
    return _maybe_record(out, [
        (a, lambda g: g @ b.data.T),
        (b, lambda g: a.data.T @ g),
    ])


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T)
    return _maybe_record(out, [(a, lambda g: g.T)])


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0.0
    return _maybe_record(out, [(a, lambda g: g * mask)])


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out = Tensor(np.where(a.data > 0.0, a.data, slope * a.data))
    factor = np.where(a.data > 0.0, 1.0, slope)
    return _maybe_record(out, [(a, lambda g: g * factor)])


def truncated_relu(a: Tensor) -> Tensor:
    """Clamp to [0, 1]; subgradient 1 strictly inside, 0 elsewhere."""
    out = Tensor(np.clip(a.data, 0.0, 1.0))
    mask = (a.data > 0.0) & (a.data < 1.0)
    return _maybe_record(out, [(a, lambda g: g * mask)])


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    return _maybe_record(out, [(a, lambda g: g * (1.0 - y * y))])


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def vjp(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (g - dot) * s

    return _maybe_record(out, [(a, vjp)])


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum())
    return _maybe_record(out, [(a, lambda g: np.broadcast_to(g, a.data.shape).copy())])


# ---------------------------------------------------------------------------
# gather / scatter primitives


def gather0(a: Tensor, ids) -> Tensor:
    """Index along axis 0 with an integer array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(a.data[ids])

    def vjp(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, ids, g)
        return ga

    return _maybe_record(out, [(a, vjp)])


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[start:stop].copy())

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        return ga

    return _maybe_record(out, [(a, vjp)])


def concat0(tensors: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=0))
    offsets = np.cumsum([0] + [t.data.shape[0] for t in tensors])
    parents = []
    for i, t in enumerate(tensors):
        lo, hi = offsets[i], offsets[i + 1]
        parents.append((t, lambda g, lo=lo, hi=hi: g[lo:hi]))
    return _maybe_record(out, parents)


def _rowsum_sorted(contrib: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    """Sum rows of ``contrib`` into ``n`` output rows grouped by the sorted
    integer vector ``index``; empty groups stay zero."""
    out = np.zeros((n,) + contrib.shape[1:], dtype=contrib.dtype)
    if len(index) == 0:
        return out
    counts = np.bincount(index, minlength=n)
    nonempty = counts > 0
    starts = np.zeros(n, dtype=np.int64)
    starts[1:] = np.cumsum(counts)[:-1]
    out[nonempty] = np.add.reduceat(contrib, starts[nonempty], axis=0)
    return out


def segment_sum(values: Tensor, segments, n_segments: int) -> Tensor:
    """Row ``s`` of the output is the sum of value rows with segment id s.

    Empty segments produce zero rows; gradients scatter back exactly.
    """
    seg = np.asarray(segments, dtype=np.int64)
    if len(seg) != values.data.shape[0]:
        raise ValueError("segments length must match the number of value rows")
    if len(seg) and (seg.min() < 0 or seg.max() >= n_segments):
        raise ValueError("segment id out of range")
    if len(seg) == 0 or np.all(np.diff(seg) >= 0):
        data = _rowsum_sorted(values.data, seg, n_segments)
    else:
        data = np.zeros((n_segments,) + values.data.shape[1:], dtype=values.data.dtype)
        np.add.at(data, seg, values.data)
    out = Tensor(data)
    return _maybe_record(out, [(values, lambda g: g[seg])])


def spmm(matrix, values: Tensor) -> Tensor:
    """Fixed sparse matrix (scipy CSR/CSC) times a dense tensor.

    The matrix is a constant; gradients flow to ``values`` only.
    """
    out = Tensor(matrix @ values.data)
    return _maybe_record(out, [(values, lambda g: matrix.T @ g)])


def hop_sum(values: Tensor, src, dst, n: int, weights=None) -> Tensor:
    """out[d] += w_e * values[s] over a symmetric directed edge list.

    ``dst`` must be sorted ascending and the (src, dst) multiset must equal
    its transpose with matching weights (true for undirected hop
    adjacencies, including self-loop entries).  Symmetry makes the operator
    self-adjoint, so the backward pass reuses the forward kernel.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)

    def kernel(mat):
        contrib = mat[src]
        if weights is not None:
            contrib = contrib * weights[:, None]
        return _rowsum_sorted(contrib, dst, n)

    out = Tensor(kernel(values.data))
    return _maybe_record(out, [(values, kernel)])


# ---------------------------------------------------------------------------
# normalization and losses


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Training-mode batch normalization over axis 0 (per-feature stats)."""
    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * istd
    out = Tensor(xhat * gamma.data + beta.data)

    def vjp_x(g):
        gxhat = g * gamma.data
        return istd * (gxhat - gxhat.mean(axis=0) - xhat * (gxhat * xhat).mean(axis=0))

    return _maybe_record(out, [
        (x, vjp_x),
        (gamma, lambda g: (g * xhat).sum(axis=0)),
        (beta, lambda g: g.sum(axis=0)),
    ])


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    running_mean: np.ndarray, running_var: np.ndarray,
                    eps: float = 1e-5) -> Tensor:
    istd = 1.0 / np.sqrt(running_var + eps)
    xhat = (x.data - running_mean) * istd
    out = Tensor(xhat * gamma.data + beta.data)
    return _maybe_record(out, [
        (x, lambda g: g * (gamma.data * istd)),
        (gamma, lambda g: (g * xhat).sum(axis=0)),
        (beta, lambda g: g.sum(axis=0)),
    ])


def mse_loss(pred: Tensor, target) -> Tensor:
    tdata = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    diff = pred.data - tdata
    out = Tensor(np.mean(diff * diff))
    parents = [(pred, lambda g: g * 2.0 * diff / diff.size)]
    if isinstance(target, Tensor):
        parents.append((target, lambda g: -g * 2.0 * diff / diff.size))
    return _maybe_record(out, parents)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy from logits with integer class labels."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    picked = z[np.arange(len(labels)), labels]
    out = Tensor(np.mean(lse - picked))

    def vjp(g):
        p = np.exp(z - zmax)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(len(labels)), labels] -= 1.0
        return g * p / len(labels)

    return _maybe_record(out, [(logits, vjp)])


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    if not training or p <= 0.0:
        return x
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(mask))


# ---------------------------------------------------------------------------
# optimizer and gradient checking


class Adam:
    """Adam with bias correction; defaults beta=(0.9, 0.999), eps=1e-8."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            mhat = self.m[i] / (1.0 - self.b1 ** self.t)
            vhat = self.v[i] / (1.0 - self.b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = 1e-6) -> float:
    """Compare tape gradients of ``fn`` against central differences.

    ``fn`` maps the given tensors to a tensor (reduced to a scalar by
    summation if needed).  Returns the max over coordinates of
    |analytic - numeric| / max(1, |analytic|).  Inputs must be 64-bit.
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise GradCheckError("grad_check requires 64-bit inputs")
        t.requires_grad = True
        t.grad = None

    def run() -> Tensor:
        out = fn(*inputs)
        return out if out.data.size == 1 else sum_all(out)

    with Tape() as tape:
        out = run()
    if not np.isfinite(out.data).all():
        raise GradCheckError("non-finite forward value")
    tape.backward(out)
    analytic = [np.array(t.grad) if t.grad is not None else np.zeros_like(t.data)
                for t in inputs]

    worst = 0.0
    for t, ana in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            hi = float(run().data.reshape(()))
            flat[idx] = orig - h
            lo = float(run().data.reshape(()))
            flat[idx] = orig
            numeric = (hi - lo) / (2.0 * h)
            if not np.isfinite(numeric) or not np.isfinite(ana_flat[idx]):
                raise GradCheckError("non-finite value during gradient check")
            err = abs(ana_flat[idx] - numeric) / max(1.0, abs(ana_flat[idx]))
            worst = max(worst, err)
    return worst
