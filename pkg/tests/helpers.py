"""
Oracles and data builders shared by the test modules
"""

from typing import Callable, List, Sequence

import numpy as np

import config
from efdm import Efdm, EfdmDataset


def numerical_grad(f: Callable[[], float], x: np.ndarray, h: float = config.GRADCHECK_STEP) -> np.ndarray:
    """
    Central differences of scalar f() with respect to every entry of x (perturbed in place).
    """
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = x[idx]
        x[idx] = saved + h
        plus = f()
        x[idx] = saved - h
        minus = f()
        x[idx] = saved
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)


def banded_efdm(label: str, band_rows: Sequence[int], rng: np.random.Generator, size: int = 32) -> Efdm:
    """
    Noisy map with a bright horizontal band; different bands are linearly separable.
    """
    pixels = rng.integers(0, 40, size=(size, size))
    for row in band_rows:
        pixels[row, :8] = 200 + rng.integers(0, 56, size=8)
    return Efdm(pixels.astype(np.uint8), label=label)


def make_dataset(
    per_class: int,
    seed: int = 0,
    size: int = 32,
    classes: Sequence[str] = ("happy", "sad"),
) -> EfdmDataset:
    rng = np.random.default_rng(seed)
    bands = {0: range(size - 12, size - 8), 1: range(4, 8)}
    items: List[Efdm] = []
    for _ in range(per_class):
        for k, name in enumerate(classes):
            items.append(banded_efdm(name, bands[k % 2], rng, size))
    return EfdmDataset(items, list(classes))
