"""
Synthetic labelled EEG with class-dependent spectral bands

Stands in for the restricted emotion dataset: every class owns a frequency
band, each recording is a handful of tones drawn inside that band with a
random phase per channel, plus white (optionally 1/f-tilted) Gaussian noise.

Randomness comes from xorshift64* generators run in parallel lanes. Each
lane is seeded with splitmix64(seed + lane); uniforms are the top 53 bits
of the xorshift64* output mapped to (0, 1]; normals use the Box-Muller
transform on consecutive uniform pairs. Identical seeds therefore give
identical recordings on any platform numpy supports.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

import config
from errors import ValidationError
from .recording import Recording
from .stft import dft

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_XORSHIFT_MULTIPLIER = np.uint64(0x2545F4914F6CDD1D)
_LANES = 1024


def splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """
    Mix instance indices into a base seed (seed xor hash(index), chained).
    """
    derived = seed & _MASK64
    for index in indices:
        derived = splitmix64(derived ^ splitmix64(index & _MASK64))
    return derived


class XorshiftGenerator:
    """
    Vectorized xorshift64* with ``lanes`` independent streams.

    Draws are laid out round-major: round r contributes lanes values
    before round r + 1 starts.
    """

    def __init__(self, seed: int, lanes: int = _LANES):
        states = [splitmix64((seed + lane) & _MASK64) or 1 for lane in range(lanes)]
        self.state = np.array(states, dtype=np.uint64)

    def next_u64(self) -> np.ndarray:
        x = self.state
        x ^= x >> np.uint64(12)
        x ^= x << np.uint64(25)
        x ^= x >> np.uint64(27)
        self.state = x
        return x * _XORSHIFT_MULTIPLIER

    def uniform(self, size: int) -> np.ndarray:
        """
        Doubles in (0, 1].
        """
        rounds = -(-size // len(self.state))
        draws = np.concatenate([self.next_u64() for _ in range(rounds)]) if rounds else np.empty(0, np.uint64)
        return ((draws[:size] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53

    def normal(self, size: int) -> np.ndarray:
        pairs = -(-size // 2)
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:size]


@dataclass(frozen=True)
class ClassBand:
    label: str
    band_center_hz: float
    band_width_hz: float
    amplitude: float

    @property
    def low_hz(self) -> float:
        return self.band_center_hz - self.band_width_hz / 2

    @property
    def high_hz(self) -> float:
        return self.band_center_hz + self.band_width_hz / 2


def _default_classes() -> List[ClassBand]:
    return [ClassBand(*entry) for entry in config.SYNTH_CLASSES]


@dataclass
class SynthSpec:
    n_channels: int = config.SYNTH_CHANNELS
    sample_rate_hz: float = config.SYNTH_SAMPLE_RATE_HZ
    duration_s: float = config.SYNTH_DURATION_S
    classes: List[ClassBand] = field(default_factory=_default_classes)
    noise_sigma: float = config.SYNTH_NOISE_SIGMA
    seed: int = config.DEFAULT_SEED
    n_tones: int = config.SYNTH_TONES
    pink_tilt: bool = False

    def __post_init__(self):
        self.classes = [c if isinstance(c, ClassBand) else ClassBand(*c) for c in self.classes]
        if self.n_channels < 1:
            raise ValidationError(f"need at least one channel, got {self.n_channels}")
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise ValidationError("sample rate and duration must be positive")
        if not self.classes:
            raise ValidationError("at least one class band is required")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.n_tones < 1:
            raise ValidationError(f"n_tones must be >= 1, got {self.n_tones}")
        nyquist = self.sample_rate_hz / 2
        for band in self.classes:
            if band.amplitude <= 0:
                raise ValidationError(f"class '{band.label}': amplitude must be > 0")
            if band.band_width_hz < 0 or band.low_hz <= 0:
                raise ValidationError(f"class '{band.label}': band must lie above 0 Hz")
            if band.high_hz >= nyquist:
                raise ValidationError(
                    f"class '{band.label}': band edge {band.high_hz} Hz reaches Nyquist {nyquist} Hz"
                )

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.classes]

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def _tilt(noise: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """
    Shape white noise to a 1/f power spectrum, keeping its per-channel std.
    """
    n = noise.shape[-1]
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    gain = np.zeros_like(freqs)
    gain[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(np.fft.rfft(noise, axis=-1) * gain, n=n, axis=-1)
    std = shaped.std(axis=-1, keepdims=True)
    target = noise.std(axis=-1, keepdims=True)
    return np.divide(shaped * target, std, out=np.zeros_like(shaped), where=std > 0)


def generate(spec: SynthSpec, class_index: int, instance: int = 0) -> Recording:
    """
    Draw one recording for a class.

    Args:
        spec: Generator settings
        class_index: Index into spec.classes
        instance: Recording number; each instance gets its own derived seed

    Returns:
        Recording labelled with the class name

    Raises:
        ValidationError: If class_index is out of range
    """
    if not 0 <= class_index < len(spec.classes):
        raise ValidationError(f"class index {class_index} outside [0, {len(spec.classes)})")
    band = spec.classes[class_index]
    rng = XorshiftGenerator(derive_seed(spec.seed, class_index, instance))

    n = spec.n_samples
    t = np.arange(n) / spec.sample_rate_hz
    freqs = band.low_hz + band.band_width_hz * rng.uniform(spec.n_tones)
    phases = 2.0 * np.pi * rng.uniform(spec.n_channels * spec.n_tones).reshape(spec.n_channels, spec.n_tones)
    tone_amplitude = band.amplitude / math.sqrt(spec.n_tones)

    data = np.zeros((spec.n_channels, n))
    for k, f in enumerate(freqs):
        data += tone_amplitude * np.sin(2.0 * np.pi * f * t[None, :] + phases[:, k:k + 1])

    if spec.noise_sigma > 0:
        noise = spec.noise_sigma * rng.normal(spec.n_channels * n).reshape(spec.n_channels, n)
        if spec.pink_tilt:
            noise = _tilt(noise, spec.sample_rate_hz)
        data += noise

    logger.debug("Generated '%s' instance %d: %d ch x %d samples", band.label, instance, spec.n_channels, n)
    return Recording(
        data=data,
        sample_rate_hz=spec.sample_rate_hz,
        label=band.label,
        subject_id="synthetic",
        session_id=str(instance),
    )


def generate_all(spec: SynthSpec, instances: int = 1) -> List[Tuple[int, Recording]]:
    """
    Every (class, instance) pair in a fixed order.
    """
    return [
        (class_index, generate(spec, class_index, instance))
        for class_index in range(len(spec.classes))
        for instance in range(instances)
    ]


def band_energy(recordings: Sequence[Recording], low_hz: float, high_hz: float) -> np.ndarray:
    """
    Mean per-channel energy inside [low_hz, high_hz] from a direct DFT, one value per recording.
    """
    energies = []
    for rec in recordings:
        coeffs = dft(rec.data)[:, : rec.n_samples // 2 + 1]
        freqs = np.arange(coeffs.shape[1]) * rec.sample_rate_hz / rec.n_samples
        mask = (freqs >= low_hz) & (freqs <= high_hz)
        energies.append(float(np.mean(np.sum(np.abs(coeffs[:, mask]) ** 2, axis=1))))
    return np.array(energies)


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    demo = SynthSpec(duration_s=4.0)
    for idx, rec in generate_all(demo):
        print(f"{rec.label}: {rec.data.shape}, std {rec.data.std():.3f}")
