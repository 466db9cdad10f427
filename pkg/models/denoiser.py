"""
Convolutional epsilon-prediction network for the diffusion model
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np

import config
from engine import Conv2d, GroupNorm, Linear, Module, Tensor, gelu
from errors import ValidationError

logger = logging.getLogger(__name__)

SKIP_SCALE = 1.0 / math.sqrt(2.0)


@dataclass
class DiffusionConfig:
    image_size: int = config.DIFFUSION_IMAGE_SIZE
    diffusion_steps: int = config.DIFFUSION_STEPS
    noise_schedule: str = config.FULL_NOISE_SCHEDULE
    lr: float = config.DIFFUSION_LR
    batch_size: int = config.DIFFUSION_BATCH_SIZE
    num_channels: int = config.DIFFUSION_CHANNELS
    num_res_blocks: int = config.DIFFUSION_RES_BLOCKS
    seed: int = config.DEFAULT_SEED
    planes: int = 3
    groups: int = config.GROUP_NORM_GROUPS
    embed_dim: int = config.TIME_EMBED_DIM

    def __post_init__(self):
        if self.image_size < 1 or self.image_size & (self.image_size - 1):
            raise ValidationError(f"image_size must be a power of two, got {self.image_size}")
        if self.diffusion_steps < 2:
            raise ValidationError(f"diffusion_steps must be >= 2, got {self.diffusion_steps}")
        if self.noise_schedule != "linear":
            raise ValidationError(f"only the linear noise schedule is supported, got '{self.noise_schedule}'")
        if self.num_channels % self.groups:
            raise ValidationError(
                f"num_channels {self.num_channels} must be divisible by {self.groups} norm groups"
            )
        if self.embed_dim % 2:
            raise ValidationError(f"embed_dim must be even, got {self.embed_dim}")
        if self.lr < 0 or self.batch_size < 1 or self.num_res_blocks < 0:
            raise ValidationError("lr must be >= 0, batch_size >= 1 and num_res_blocks >= 0")

    @classmethod
    def full(cls, **overrides: Any) -> "DiffusionConfig":
        values = dict(
            image_size=config.FULL_IMAGE_SIZE,
            diffusion_steps=config.FULL_DIFFUSION_STEPS,
            num_channels=config.FULL_NUM_CHANNELS,
            num_res_blocks=config.FULL_NUM_RES_BLOCKS,
            lr=config.FULL_LR,
            batch_size=config.FULL_BATCH_SIZE,
        )
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def image_shape(self):
        return (self.planes, self.image_size, self.image_size)


def timestep_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """
    Sinusoidal embedding: [cos(t * f_i), sin(t * f_i)] with geometric f_i.
    """
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.cos(args), np.sin(args)], axis=1)


class ResidualBlock(Module):
    def __init__(self, channels: int, groups: int, rng: np.random.Generator):
        self.norm1 = GroupNorm(groups, channels)
        self.conv1 = Conv2d(channels, channels, 3, rng, padding=1)
        self.time_proj = Linear(channels, channels, rng)
        self.norm2 = GroupNorm(groups, channels)
        self.conv2 = Conv2d(channels, channels, 3, rng, padding=1)

    def forward(self, x: Tensor, emb: Tensor) -> Tensor:
        n, c = x.shape[:2]
        h = self.conv1(gelu(self.norm1(x)))
        h = h + self.time_proj(emb).reshape(n, c, 1, 1)
        h = self.conv2(gelu(self.norm2(h)))
        return (x + h) * SKIP_SCALE


class Denoiser(Module):
    """
    Predicts the noise in x_t; output shape always equals input shape.
    """

    def __init__(self, cfg: DiffusionConfig, rng: np.random.Generator):
        c = cfg.num_channels
        self.embed_dim = cfg.embed_dim
        self.time_in = Linear(cfg.embed_dim, c, rng)
        self.time_out = Linear(c, c, rng)
        self.input_conv = Conv2d(cfg.planes, c, 3, rng, padding=1)
        self.blocks = [ResidualBlock(c, cfg.groups, rng) for _ in range(cfg.num_res_blocks)]
        self.output_norm = GroupNorm(cfg.groups, c)
        self.output_conv = Conv2d(c, cfg.planes, 3, rng, padding=1)

    def forward(self, x: Tensor, t: np.ndarray) -> Tensor:
        steps = np.broadcast_to(np.asarray(t), (x.shape[0],))
        emb = Tensor(timestep_embedding(steps, self.embed_dim))
        emb = self.time_out(gelu(self.time_in(emb)))
        h = self.input_conv(x)
        for block in self.blocks:
            h = block(h, emb)
        return self.output_conv(gelu(self.output_norm(h)))


def build_denoiser(cfg: DiffusionConfig) -> Denoiser:
    model = Denoiser(cfg, np.random.default_rng(cfg.seed))
    logger.info("✓ Denoiser built: %s parameters (C=%d, R=%d, %dx%d)",
                f"{model.parameter_count():,}", cfg.num_channels, cfg.num_res_blocks,
                cfg.image_size, cfg.image_size)
    return model
