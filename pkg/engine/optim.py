"""
Adam optimizer with bias correction
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

import config
from errors import OptimizerStateError, ValidationError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = config.FULL_LR
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    step_count: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0:
            raise ValidationError(f"learning rate must be non-negative, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")


def adam_step(params: Sequence[Tensor], state: AdamState) -> Sequence[Tensor]:
    """
    Apply one bias-corrected Adam update in place, then zero the gradients.

    Args:
        params: Parameters with populated ``grad``
        state: Moment buffers, created on the first call

    Returns:
        The updated parameters

    Raises:
        OptimizerStateError: If a parameter has no gradient or the buffers
            do not match the parameter shapes
    """
    missing = [i for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise OptimizerStateError(f"parameters {missing} have no gradient; run backward() first")

    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
    if len(state.first_moment) != len(params) or any(
        m.shape != p.shape for m, p in zip(state.first_moment, params)
    ):
        raise OptimizerStateError("moment buffers do not match the parameter set")

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for p, m, v in zip(params, state.first_moment, state.second_moment):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = np.zeros_like(p.data)

    return params


class Adam:
    """
    Binds a parameter list to an AdamState.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = config.FULL_LR, **kwargs):
        self.params = list(params)
        self.state = AdamState(lr=lr, **kwargs)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
