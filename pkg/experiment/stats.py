"""
Confidence intervals over repeated runs
"""

import math
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

import config
from errors import ValidationError


def confidence_interval(values: Sequence[float], level: float = config.CONFIDENCE_LEVEL) -> Tuple[float, float]:
    """
    Student-t interval of the mean.

    Args:
        values: Per-run observations, at least two
        level: Two-sided coverage

    Returns:
        Tuple of (mean, half_width) where half_width = t * s / sqrt(n)
        with the sample standard deviation s

    Raises:
        ValidationError: If fewer than two values are given
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n < 2:
        raise ValidationError(f"a confidence interval needs at least 2 values, got {n}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"confidence level must lie in (0, 1), got {level}")
    mean = float(values.mean())
    spread = float(values.std(ddof=1))
    if spread == 0.0:
        return mean, 0.0
    quantile = stats.t.ppf(0.5 + level / 2.0, n - 1)
    return mean, float(quantile * spread / math.sqrt(n))


def curve_interval(runs: np.ndarray, level: float = config.CONFIDENCE_LEVEL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Column-wise confidence_interval over a runs x epochs matrix.
    """
    runs = np.asarray(runs, dtype=np.float64)
    if runs.ndim != 2:
        raise ValidationError(f"expected a runs x epochs matrix, got shape {runs.shape}")
    pairs = [confidence_interval(runs[:, j], level) for j in range(runs.shape[1])]
    means = np.array([m for m, _ in pairs])
    halves = np.array([h for _, h in pairs])
    return means, halves
