"""
DDPM forward process, epsilon-prediction objective and ancestral sampler
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

import config
from engine import Adam, Tensor, mse, no_grad
from errors import NonFiniteError, SamplingDivergenceError, TrainingDivergenceError, ValidationError
from efdm.maps import Efdm, float_to_pixels
from eeg.datagen import derive_seed

logger = logging.getLogger(__name__)

ArrayOrTensor = Union[np.ndarray, Tensor]
SAMPLE_SHARD = 16


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Per-step variances. Index t = 0 .. T-1 stands for diffusion step t + 1.
    """

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValidationError("a schedule needs at least one beta")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValidationError("every beta must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)

    @property
    def T(self) -> int:
        return self.betas.size

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def check_step(self, t: Union[int, np.ndarray]) -> np.ndarray:
        steps = np.asarray(t, dtype=np.int64)
        if steps.size and (steps.min() < 0 or steps.max() >= self.T):
            raise ValidationError(f"diffusion step outside [0, {self.T}): {t}")
        return steps


def linear_schedule(T: int) -> NoiseSchedule:
    """
    Betas spaced linearly from 1e-4 to 0.02, both rescaled by 1000/T so
    shorter chains destroy the signal about as completely.

    Raises:
        ValidationError: If T < 2
    """
    if T < 2:
        raise ValidationError(f"a linear schedule needs T >= 2, got {T}")
    scale = 1000.0 / T
    betas = np.linspace(config.BETA_START * scale, config.BETA_END * scale, T)
    return NoiseSchedule(np.clip(betas, 1e-12, config.BETA_MAX))


def _broadcast_coeff(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape(values.shape + (1,) * (ndim - values.ndim))


def q_sample(x0: ArrayOrTensor, t: Union[int, np.ndarray], eps: ArrayOrTensor, sched: NoiseSchedule) -> Tensor:
    """
    Jump straight to step t: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.

    Args:
        x0: Clean data, (N, ...) when t is per-item
        t: Step index, scalar or one per batch item
        eps: Standard normal noise with x0's shape
        sched: Noise schedule

    Raises:
        DimensionError / ValidationError: On shape mismatch or t out of range
    """
    x0 = x0.data if isinstance(x0, Tensor) else np.asarray(x0, dtype=np.float64)
    eps = eps.data if isinstance(eps, Tensor) else np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValidationError(f"noise shape {eps.shape} differs from data shape {x0.shape}")
    steps = sched.check_step(t)
    abar = sched.alpha_bars[steps]
    if steps.ndim:
        abar = _broadcast_coeff(abar, x0.ndim)
    return Tensor(np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps)


def q_step(x_prev: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """
    One forward transition: sqrt(alpha_t) * x_{t-1} + sqrt(beta_t) * eps.
    """
    sched.check_step(t)
    return math.sqrt(sched.alphas[t]) * x_prev + math.sqrt(sched.betas[t]) * eps


def train_step(
    model,
    batch: ArrayOrTensor,
    sched: NoiseSchedule,
    rng: np.random.Generator,
    optimizer: Adam,
    step: int = 0,
    last_loss: float = float("nan"),
    epoch: Optional[int] = None,
) -> float:
    """
    One epsilon-prediction update on a batch of clean images.

    ``last_loss`` (the previous step's loss) and ``epoch`` are only used to
    describe a divergence.

    Returns:
        The batch loss before the update

    Raises:
        ValidationError: If batch values fall outside [-1, 1]
        TrainingDivergenceError: If the loss or gradients are not finite
    """
    x0 = batch.data if isinstance(batch, Tensor) else np.asarray(batch, dtype=np.float64)
    if x0.size and (x0.min() < -1.0 or x0.max() > 1.0):
        raise ValidationError("diffusion batches must be scaled to [-1, 1]")

    n = x0.shape[0]
    t = rng.integers(0, sched.T, size=n)
    eps = rng.standard_normal(x0.shape)
    x_t = q_sample(x0, t, eps, sched)

    loss_value = last_loss
    try:
        loss = mse(model(x_t, t), eps)
        loss_value = loss.item()
        loss.backward()
        optimizer.step()
    except NonFiniteError as e:
        raise TrainingDivergenceError(loss_value, step, epoch) from e
    return loss_value


def p_sample_loop(
    model,
    n: int,
    sched: NoiseSchedule,
    rng: np.random.Generator,
    image_shape: Tuple[int, ...],
) -> Tensor:
    """
    Ancestral sampling from x_T ~ N(0, I) down to x_0.

    Uses the fixed variance sigma_t^2 = beta_t and no noise on the last step.
    The result is clamped to [-1, 1].

    Raises:
        SamplingDivergenceError: If any intermediate value is not finite
    """
    x = rng.standard_normal((n,) + tuple(image_shape))
    alphas, betas, abars = sched.alphas, sched.betas, sched.alpha_bars
    with no_grad():
        for t in reversed(range(sched.T)):
            steps = np.full(n, t, dtype=np.int64)
            try:
                eps_hat = model(Tensor(x), steps).data
            except NonFiniteError as e:
                raise SamplingDivergenceError(t) from e
            mean = (x - betas[t] / math.sqrt(1.0 - abars[t]) * eps_hat) / math.sqrt(alphas[t])
            if t > 0:
                x = mean + math.sqrt(betas[t]) * rng.standard_normal(x.shape)
            else:
                x = mean
            if not np.all(np.isfinite(x)):
                raise SamplingDivergenceError(t)
    return Tensor(np.clip(x, -1.0, 1.0))


def sample(
    model,
    n: int,
    sched: NoiseSchedule,
    seed: int,
    image_shape: Tuple[int, ...],
    threads: int = 1,
) -> np.ndarray:
    """
    Draw n images in fixed-size shards, each with its own derived seed, so
    the output does not depend on the thread count.
    """
    shards = [(i, min(SAMPLE_SHARD, n - start)) for i, start in enumerate(range(0, n, SAMPLE_SHARD))]

    def run(shard: Tuple[int, int]) -> np.ndarray:
        index, size = shard
        shard_rng = np.random.default_rng(derive_seed(seed, index))
        return p_sample_loop(model, size, sched, shard_rng, image_shape).data

    if threads > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, shards))
    else:
        parts = [run(shard) for shard in shards]
    return np.concatenate(parts) if parts else np.empty((0,) + tuple(image_shape))


def sample_to_efdm(x: ArrayOrTensor, label: str = "", meta: Optional[dict] = None) -> Efdm:
    """
    Quantize one generated image back to an 8-bit map.

    Accepts H x W or planes x H x W; planes are averaged first.
    """
    values = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if values.ndim == 3:
        values = values.mean(axis=0)
    if values.ndim != 2:
        raise ValidationError(f"expected an H x W or C x H x W sample, got shape {values.shape}")
    return Efdm(float_to_pixels(values), label=label, meta={**(meta or {}), "synthetic": True})


def samples_to_efdms(batch: np.ndarray, label: str = "", meta: Optional[dict] = None) -> Sequence[Efdm]:
    return [sample_to_efdm(x, label, {**(meta or {}), "sample": i}) for i, x in enumerate(batch)]
