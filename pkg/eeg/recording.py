"""
Multichannel EEG recordings and their on-disk formats
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from errors import FormatError, ValidationError

logger = logging.getLogger(__name__)

BINARY_MAGIC = b"EEGR"
# magic, u32 channels, u32 time steps, f32 sample rate
BINARY_HEADER = struct.Struct("<4sIIf")

PathLike = Union[str, Path]


@dataclass
class Recording:
    """
    A channels x time matrix of microvolt samples.

    Text files store channels as columns and time steps as rows; in memory
    the matrix is held transposed so each channel is a contiguous row.
    """

    data: np.ndarray
    sample_rate_hz: float
    label: str = ""
    subject_id: str = ""
    session_id: str = ""
    channel_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValidationError(f"recording must be a non-empty channels x time matrix, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("recording contains NaN or infinite samples")
        if self.sample_rate_hz <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not self.channel_names:
            self.channel_names = [f"ch{i}" for i in range(self.n_channels)]
        elif len(self.channel_names) != self.n_channels:
            raise ValidationError(
                f"{len(self.channel_names)} channel names for {self.n_channels} channels"
            )

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


def load_text_recording(
    path: PathLike,
    sample_rate_hz: float,
    label: str = "",
    delimiter: str = ",",
) -> Recording:
    """
    Read a delimited text recording: header row of channel names, then one
    row per time step.

    Raises:
        FileNotFoundError: If the file does not exist
        FormatError: If the body is not numeric
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Recording file not found: {path}")
    try:
        frame = pd.read_csv(path, sep=delimiter)
        values = frame.to_numpy(dtype=np.float64)
    except (ValueError, pd.errors.ParserError) as e:
        raise FormatError(f"{path}: not a numeric delimited recording: {e}") from e
    logger.debug("Loaded %s: %d steps x %d channels", path.name, values.shape[0], values.shape[1])
    return Recording(
        data=values.T,
        sample_rate_hz=sample_rate_hz,
        label=label,
        channel_names=[str(c) for c in frame.columns],
    )


def save_text_recording(rec: Recording, path: PathLike, delimiter: str = ",") -> Path:
    path = Path(path)
    frame = pd.DataFrame(rec.data.T, columns=rec.channel_names)
    frame.to_csv(path, sep=delimiter, index=False, float_format="%.9g")
    return path


def load_binary_recording(path: PathLike, label: str = "") -> Recording:
    """
    Read the raw binary format: 16-byte little-endian header followed by
    channels x time row-major float32 samples.

    Raises:
        FileNotFoundError: If the file does not exist
        FormatError: On bad magic or a truncated body
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Recording file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < BINARY_HEADER.size:
        raise FormatError(f"{path}: too short for a recording header")
    magic, channels, steps, rate = BINARY_HEADER.unpack_from(raw)
    if magic != BINARY_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {BINARY_MAGIC!r}")
    expected = channels * steps * 4
    body = raw[BINARY_HEADER.size:]
    if len(body) != expected:
        raise FormatError(f"{path}: body holds {len(body)} bytes, header implies {expected}")
    data = np.frombuffer(body, dtype="<f4").reshape(channels, steps)
    return Recording(data=data.astype(np.float64), sample_rate_hz=float(rate), label=label)


def save_binary_recording(rec: Recording, path: PathLike) -> Path:
    path = Path(path)
    header = BINARY_HEADER.pack(BINARY_MAGIC, rec.n_channels, rec.n_samples, rec.sample_rate_hz)
    path.write_bytes(header + rec.data.astype("<f4").tobytes(order="C"))
    return path


def load_recording(
    path: PathLike,
    sample_rate_hz: Optional[float] = None,
    label: str = "",
) -> Recording:
    """
    Read either format, recognising binary files by their magic bytes.
    """
    path = Path(path)
    with open(path, "rb") as f:
        is_binary = f.read(4) == BINARY_MAGIC
    if is_binary:
        return load_binary_recording(path, label=label)
    if sample_rate_hz is None:
        raise ValidationError(f"{path}: text recordings need an explicit sample rate")
    return load_text_recording(path, sample_rate_hz, label=label)
