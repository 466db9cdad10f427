"""
Novelty check: how close each synthetic EFDM is to the training set
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from efdm.dataset import EfdmDataset
from errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass
class ReplicationReport:
    distances: np.ndarray
    nearest: np.ndarray
    duplicates: int

    @property
    def min_distance(self) -> float:
        return float(self.distances.min())

    @property
    def mean_distance(self) -> float:
        return float(self.distances.mean())


def nearest_neighbor_distances(synth: EfdmDataset, train: EfdmDataset, chunk: int = 256) -> ReplicationReport:
    """
    For every synthetic EFDM, the smallest mean absolute pixel difference
    (0-255 scale) to any training EFDM, and how many synthetic maps are
    byte-identical to a training map.

    Raises:
        ValidationError: If either set is empty or the image shapes differ
    """
    if len(synth) == 0 or len(train) == 0:
        raise ValidationError("replication check needs non-empty synthetic and training sets")
    if synth.image_shape != train.image_shape:
        raise ValidationError(f"image shapes differ: {synth.image_shape} vs {train.image_shape}")

    reference = train.pixel_stack().reshape(len(train), -1).astype(np.float64)
    queries = synth.pixel_stack().reshape(len(synth), -1).astype(np.float64)
    pixels = reference.shape[1]

    distances = np.empty(len(synth))
    nearest = np.empty(len(synth), dtype=np.int64)
    for start in range(0, len(synth), chunk):
        block = cdist(queries[start:start + chunk], reference, metric="cityblock") / pixels
        nearest[start:start + chunk] = block.argmin(axis=1)
        distances[start:start + chunk] = block.min(axis=1)

    known = set(train.fingerprints())
    duplicates = sum(fp in known for fp in synth.fingerprints())
    logger.info("Replication check: %d synthetic vs %d training, min distance %.3f, %d exact duplicates",
                len(synth), len(train), distances.min(), duplicates)
    return ReplicationReport(distances, nearest, duplicates)
