"""
Tensor engine: autodiff arrays, layers and the Adam optimizer
"""

from .tensor import Tensor, no_grad, parameter, as_tensor
from .functional import conv2d, maxpool2d, linear, gelu, cross_entropy, mse, group_norm
from .layers import Module, Conv2d, Linear, LazyLinear, GroupNorm
from .optim import Adam, AdamState, adam_step
from .hardware import detect_hardware, resolve_threads

__all__ = [
    "Tensor",
    "no_grad",
    "parameter",
    "as_tensor",
    "conv2d",
    "maxpool2d",
    "linear",
    "gelu",
    "cross_entropy",
    "mse",
    "group_norm",
    "Module",
    "Conv2d",
    "Linear",
    "LazyLinear",
    "GroupNorm",
    "Adam",
    "AdamState",
    "adam_step",
    "detect_hardware",
    "resolve_threads",
]
