"""
Parameter containers built on the functional ops
"""

import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError, ValidationError
from . import functional as F
from .tensor import Tensor, parameter


def fan_in_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    """
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """
    Minimal module tree: parameters are discovered by walking attributes.
    """

    def __call__(self, *args, **kwargs) -> Tensor:
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs) -> Tensor:
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self._bind_lazy(state)
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ValidationError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            if p.shape != state[name].shape:
                raise DimensionError(f"parameter '{name}' shape differs", p.shape, state[name].shape)
            p.data = np.array(state[name], dtype=np.float64)

    def _bind_lazy(self, state: Dict[str, np.ndarray], prefix: str = "") -> None:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Module):
                value._bind_child(state, path)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        item._bind_child(state, f"{path}.{i}")

    def _bind_child(self, state: Dict[str, np.ndarray], path: str) -> None:
        if isinstance(self, LazyLinear) and self.weight is None:
            key = f"{path}.weight"
            if key in state:
                self.bind(state[key].shape[1])
        else:
            self._bind_lazy(state, f"{path}.")


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: Sequence[int],
        rng: np.random.Generator,
        stride: Sequence[int] = (1, 1),
        padding: Sequence[int] = (0, 0),
    ):
        kh, kw = F._pair(kernel_size)
        fan_in = in_channels * kh * kw
        self.stride = F._pair(stride)
        self.padding = F._pair(padding)
        self.weight = parameter(fan_in_uniform(rng, (out_channels, in_channels, kh, kw), fan_in))
        self.bias = parameter(fan_in_uniform(rng, (out_channels,), fan_in))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.weight = parameter(fan_in_uniform(rng, (out_features, in_features), in_features))
        self.bias = parameter(fan_in_uniform(rng, (out_features,), in_features))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LazyLinear(Module):
    """
    Linear layer whose in_features is fixed by the first input it sees.

    Initialization draws from a private generator seeded at construction,
    so the bound weights do not depend on when binding happens.
    """

    def __init__(self, out_features: int, rng: np.random.Generator):
        self.out_features = out_features
        self._seed = int(rng.integers(0, 2**63 - 1))
        self.in_features: Optional[int] = None
        self.weight: Optional[Tensor] = None
        self.bias: Optional[Tensor] = None

    def bind(self, in_features: int) -> None:
        if self.in_features is not None:
            if in_features != self.in_features:
                raise DimensionError(
                    f"LazyLinear already bound to {self.in_features} inputs, got {in_features}",
                    (self.out_features, self.in_features),
                    (in_features,),
                )
            return
        init = np.random.default_rng(self._seed)
        self.in_features = in_features
        self.weight = parameter(fan_in_uniform(init, (self.out_features, in_features), in_features))
        self.bias = parameter(fan_in_uniform(init, (self.out_features,), in_features))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2:
            raise DimensionError("LazyLinear expects (N, features) input", x.shape)
        self.bind(x.shape[1])
        return F.linear(x, self.weight, self.bias)


class GroupNorm(Module):
    def __init__(self, groups: int, channels: int, eps: float = 1e-5):
        if channels % groups:
            raise ValidationError(f"{channels} channels do not split into {groups} groups")
        self.groups = groups
        self.eps = eps
        self.gamma = parameter(np.ones(channels))
        self.beta = parameter(np.zeros(channels))

    def forward(self, x: Tensor) -> Tensor:
        return F.group_norm(x, self.groups, self.gamma, self.beta, self.eps)
