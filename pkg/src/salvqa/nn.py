"""Parameter containers, layers and optimisers."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F
from .rng import RngState
from .tensor import Tensor, parameter


class Module:
    """Base class; parameters are discovered from attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        own = dict(self.named_parameters())
        for name, p in own.items():
            key = prefix + name
            if key not in state:
                raise KeyError(f"missing tensor {key!r}")
            value = np.asarray(state[key], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{key}: shape {value.shape} != {p.shape}")
            p.data[...] = value

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def he_normal(rng: RngState, shape: tuple, fan_in: int) -> np.ndarray:
    return rng.normal(shape) * math.sqrt(2.0 / fan_in)


class Conv3d(Module):
    def __init__(self, c_in: int, c_out: int, kernel=3, padding=None, stride=1, bias=True, *, rng: RngState):
        k = (kernel,) * 3 if isinstance(kernel, int) else tuple(kernel)
        self.padding = tuple(kk // 2 for kk in k) if padding is None else padding
        self.stride = stride
        self.weight = parameter(he_normal(rng, (c_out, c_in) + k, c_in * math.prod(k)))
        self.bias = parameter(np.zeros(c_out)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias, self.stride, self.padding)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel=3, padding=None, stride=1, bias=True, *, rng: RngState):
        k = (kernel,) * 2 if isinstance(kernel, int) else tuple(kernel)
        self.padding = tuple(kk // 2 for kk in k) if padding is None else padding
        self.stride = stride
        self.weight = parameter(he_normal(rng, (c_out, c_in) + k, c_in * math.prod(k)))
        self.bias = parameter(np.zeros(c_out)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, bias=True, *, rng: RngState):
        self.weight = parameter(rng.normal((d_out, d_in)) * math.sqrt(1.0 / d_in))
        self.bias = parameter(np.zeros(d_out)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros(p.shape) for p in self.params]
        self._v = [np.zeros(p.shape) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class CosineAnnealing:
    """lr_t = lr_min + (lr_0 - lr_min) * (1 + cos(pi * t / t_max)) / 2."""

    def __init__(self, optimizer: Adam, t_max: int, lr_min: float = 0.0):
        self.optimizer = optimizer
        self.base_lr = optimizer.lr
        self.t_max = max(int(t_max), 1)
        self.lr_min = lr_min
        self.t = 0

    def step(self) -> None:
        self.t = min(self.t + 1, self.t_max)
        cos = 1.0 + math.cos(math.pi * self.t / self.t_max)
        self.optimizer.lr = self.lr_min + 0.5 * (self.base_lr - self.lr_min) * cos
