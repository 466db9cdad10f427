"""
Electrode-frequency distribution maps (EFDMs)

An EFDM is one STFT frame drawn as a grayscale image: channels run along
the columns, frequency bins up the rows. Frames are cut at ``cut_hz``,
divided by their own maximum, zero-padded to a square, flipped so the
highest retained frequency sits on row 0, and quantized with
round-half-up to 8 bits.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

import config
from engine import Tensor
from errors import CapacityError, ValidationError
from eeg.stft import bins_below

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Efdm:
    pixels: np.ndarray
    label: str = ""
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise ValidationError(f"EFDM pixels must be 2-D, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ValidationError("EFDM pixels must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def synthetic(self) -> bool:
        return bool(self.meta.get("synthetic", False))


def quantize(values: np.ndarray) -> np.ndarray:
    """
    Map [0, 1] intensities to uint8 with round-half-up.
    """
    return np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def flip_rows(grid: np.ndarray) -> np.ndarray:
    return grid[..., ::-1, :]


def build_efdms(
    spec_magnitudes: np.ndarray,
    freq_resolution_hz: float,
    cut_hz: float = config.CUT_HZ,
    image_size: int = config.EFDM_IMAGE_SIZE,
    label: str = "",
    meta: Optional[Dict[str, Any]] = None,
) -> List[Efdm]:
    """
    Turn STFT magnitudes into one EFDM per frame.

    Args:
        spec_magnitudes: frames x freq_bins x channels, non-negative
        freq_resolution_hz: Bin spacing of the spectrogram
        cut_hz: Highest frequency kept
        image_size: Side of the square output image
        label: Emotion tag stamped on every map
        meta: Extra metadata copied into every map (frame index is added)

    Returns:
        List of Efdm, one per frame

    Raises:
        ValidationError: If the input is malformed or cut_hz exceeds Nyquist
        CapacityError: If the kept bins or channels exceed image_size
    """
    mags = np.asarray(spec_magnitudes, dtype=np.float64)
    if mags.ndim != 3:
        raise ValidationError(f"expected frames x bins x channels magnitudes, got shape {mags.shape}")
    if np.any(mags < 0) or not np.all(np.isfinite(mags)):
        raise ValidationError("magnitudes must be finite and non-negative")
    frames, bins, channels = mags.shape
    nyquist = (bins - 1) * freq_resolution_hz
    if cut_hz > nyquist + 1e-9:
        raise ValidationError(f"cut {cut_hz} Hz exceeds Nyquist {nyquist} Hz")

    kept = min(bins_below(cut_hz, freq_resolution_hz), bins)
    if kept > image_size or channels > image_size:
        raise CapacityError(
            f"{kept} frequency bins x {channels} channels do not fit a {image_size}x{image_size} EFDM; "
            f"use a larger image size or a coarser frequency resolution (smaller wsize)"
        )

    cut = mags[:, :kept, :]
    peak = cut.max(axis=(1, 2), keepdims=True)
    normalized = np.divide(cut, peak, out=np.zeros_like(cut), where=peak > 0)

    canvas = np.zeros((frames, image_size, image_size))
    canvas[:, :kept, :channels] = normalized
    pixels = quantize(flip_rows(canvas))

    base = dict(meta or {})
    logger.debug("Built %d EFDMs (%d bins x %d channels -> %dx%d)", frames, kept, channels, image_size, image_size)
    return [Efdm(pixels[i], label=label, meta={**base, "frame": i}) for i in range(frames)]


def to_rgb_triple(e: Efdm) -> np.ndarray:
    """
    Replicate the grayscale plane into a 3 x H x W uint8 image.
    """
    return np.repeat(e.pixels[None, :, :], 3, axis=0)


def pixels_to_float(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64) / 127.5 - 1.0


def float_to_pixels(values: np.ndarray) -> np.ndarray:
    """
    Inverse of pixels_to_float, clipped and rounded half-up.
    """
    return quantize((np.asarray(values, dtype=np.float64) + 1.0) / 2.0)


def to_float_tensor(e: Efdm, planes: int = 3) -> Tensor:
    """
    Model input: ``planes`` copies of the map scaled to [-1, 1].
    """
    scaled = pixels_to_float(e.pixels)
    return Tensor(np.repeat(scaled[None, :, :], planes, axis=0))
