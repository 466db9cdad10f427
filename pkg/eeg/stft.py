"""
Short-time Fourier analysis of multichannel recordings
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

import config
from errors import ValidationError
from .recording import Recording

logger = logging.getLogger(__name__)

WINDOWS = {"hann": "hann", "rectangular": "boxcar"}


@dataclass(frozen=True)
class Spectrogram:
    """
    One-sided STFT: ``values`` is frames x freq_bins x channels, complex.
    """

    values: np.ndarray
    freq_resolution_hz: float
    hop: int
    wsize: int
    sample_rate_hz: float

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def dft(x: np.ndarray) -> np.ndarray:
    """
    Direct O(n^2) DFT along the last axis.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T


def fft(x: np.ndarray) -> np.ndarray:
    """
    Iterative radix-2 decimation-in-time FFT along the last axis.

    Raises:
        ValidationError: If the transform length is not a power of two
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValidationError(f"radix-2 FFT needs a power-of-two length, got {n}")
    levels = n.bit_length() - 1
    index = np.arange(n)
    reversed_index = np.zeros(n, dtype=np.int64)
    for bit in range(levels):
        reversed_index |= ((index >> bit) & 1) << (levels - 1 - bit)

    lead = x.shape[:-1]
    a = x[..., reversed_index]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        size *= 2
    return a


def spectrum(x: np.ndarray) -> np.ndarray:
    """
    Full DFT along the last axis, FFT when the length allows it.
    """
    n = np.shape(x)[-1]
    return fft(x) if is_power_of_two(n) else dft(x)


def frame_count(n_samples: int, wsize: int, hop: int) -> int:
    """
    Full frames plus one zero-padded tail frame when the hop leaves a remainder.
    """
    full = (n_samples - wsize) // hop + 1
    return full + (1 if (n_samples - wsize) % hop else 0)


def stft(
    rec: Recording,
    wsize: int,
    hop: Optional[int] = None,
    window: str = "hann",
) -> Spectrogram:
    """
    Windowed DFT of successive segments of every channel.

    Args:
        rec: Input recording
        wsize: Segment length in samples (even, >= 4)
        hop: Offset between segment starts; defaults to wsize (no overlap)
        window: "hann", or "rectangular" for oracle comparisons

    Returns:
        Spectrogram with wsize/2 + 1 bins per frame

    Raises:
        ValidationError: On an invalid wsize/hop/window or a recording
            shorter than one segment
    """
    hop = wsize if hop is None else hop
    if wsize < config.MIN_WSIZE or wsize % 2:
        raise ValidationError(f"wsize must be even and >= {config.MIN_WSIZE}, got {wsize}")
    if not 0 < hop <= wsize:
        raise ValidationError(f"hop must satisfy 0 < hop <= wsize, got hop={hop}, wsize={wsize}")
    if window not in WINDOWS:
        raise ValidationError(f"unknown window '{window}', expected one of {sorted(WINDOWS)}")
    if wsize > rec.n_samples:
        raise ValidationError(f"wsize {wsize} exceeds recording length {rec.n_samples}")

    frames = frame_count(rec.n_samples, wsize, hop)
    padded_length = (frames - 1) * hop + wsize
    signal = np.pad(rec.data, ((0, 0), (0, padded_length - rec.n_samples)))
    segments = sliding_window_view(signal, wsize, axis=1)[:, ::hop][:, :frames]
    taper = get_window(WINDOWS[window], wsize, fftbins=True)

    bins = wsize // 2 + 1
    values = spectrum(segments * taper)[..., :bins]
    logger.debug("STFT: %d channels x %d frames x %d bins (wsize=%d, hop=%d, %s)",
                 rec.n_channels, frames, bins, wsize, hop, window)
    return Spectrogram(
        values=np.ascontiguousarray(values.transpose(1, 2, 0)),
        freq_resolution_hz=rec.sample_rate_hz / wsize,
        hop=hop,
        wsize=wsize,
        sample_rate_hz=rec.sample_rate_hz,
    )


def magnitude(spec: Spectrogram) -> np.ndarray:
    """
    Elementwise modulus of the complex STFT values.
    """
    return np.hypot(spec.values.real, spec.values.imag)


def bins_below(cut_hz: float, freq_resolution_hz: float) -> int:
    """
    Number of bins whose centre frequency is <= cut_hz.
    """
    return int(math.floor(cut_hz / freq_resolution_hz + 1e-9)) + 1


def default_wsize(
    sample_rate_hz: float,
    cut_hz: float = config.CUT_HZ,
    image_size: int = config.EFDM_IMAGE_SIZE,
    n_samples: Optional[int] = None,
) -> int:
    """
    Largest power-of-two window whose bins up to cut_hz fit the image height.

    Raises:
        ValidationError: If even the smallest window does not fit
    """
    wsize = config.MIN_WSIZE
    if bins_below(min(cut_hz, sample_rate_hz / 2), sample_rate_hz / wsize) > image_size:
        raise ValidationError(f"no window fits {cut_hz} Hz into {image_size} rows")
    while True:
        candidate = wsize * 2
        if n_samples is not None and candidate > n_samples:
            break
        kept = min(bins_below(cut_hz, sample_rate_hz / candidate), candidate // 2 + 1)
        if kept > image_size:
            break
        wsize = candidate
    return wsize
