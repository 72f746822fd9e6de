"""Small neural-network building blocks on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base with recursive parameter collection."""

    def parameters(self) -> list[Tensor]:
        params: list[Tensor] = []
        for value in self.__dict__.values():
            if isinstance(value, Tensor) and value.requires_grad:
                params.append(value)
            elif isinstance(value, Module):
                params.extend(value.parameters())
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        params.extend(item.parameters())
                    elif isinstance(item, Tensor) and item.requires_grad:
                        params.append(item)
        return params

    def named_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        """All state arrays (parameters and running statistics) by name."""
        out: dict[str, np.ndarray] = {}
        for name, value in self.__dict__.items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out[key] = value.data
            elif isinstance(value, np.ndarray):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_arrays(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_arrays(f"{key}.{i}."))
                    elif isinstance(item, Tensor):
                        out[f"{key}.{i}"] = item.data
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        for name, value in list(self.__dict__.items()):
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                value.data = np.array(arrays[key])
            elif isinstance(value, np.ndarray):
                setattr(self, name, np.array(arrays[key]))
            elif isinstance(value, Module):
                value.load_arrays(arrays, f"{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        item.load_arrays(arrays, f"{key}.{i}.")
                    elif isinstance(item, Tensor):
                        item.data = np.array(arrays[f"{key}.{i}"])


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.weight = Tensor(uniform_init(rng, (d_in, d_out), d_in), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.weight), self.bias)


class BatchNorm(Module):
    """Per-feature batch statistics in training; running averages at eval
    (momentum 0.9)."""

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if training:
            mu = x.data.mean(axis=0)
            var = x.data.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            return ad.batch_norm(x, self.gamma, self.beta, self.eps)
        return ad.batch_norm_eval(x, self.gamma, self.beta,
                                  self.running_mean, self.running_var, self.eps)


class MLP(Module):
    """Two linear layers, each followed by batch normalization and ReLU."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.lin1 = Linear(d_in, d_out, rng)
        self.bn1 = BatchNorm(d_out)
        self.lin2 = Linear(d_out, d_out, rng)
        self.bn2 = BatchNorm(d_out)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        h = ad.relu(self.bn1(self.lin1(x), training))
        return ad.relu(self.bn2(self.lin2(h), training))


class Identity(Module):
    """Stand-in transform; useful for reduction tests."""

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return x


class Embedding(Module):
    def __init__(self, count: int, dim: int, rng: np.random.Generator):
        self.table = Tensor(uniform_init(rng, (count, dim), dim), requires_grad=True)

    def __call__(self, ids) -> Tensor:
        return ad.gather0(self.table, ids)
