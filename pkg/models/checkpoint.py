"""
Checkpoint container shared by the diffusion and classifier models

Layout (little-endian):
    "DDPM" | u16 version
    u32 length + UTF-8 JSON config block ({"kind": ..., ...})
    u32 length + UTF-8 JSON manifest ([{"name", "shape", "offset"}, ...])
    u64 value count + float64 parameter buffer
Offsets count float64 elements from the start of the buffer.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"DDPM"
VERSION = 1

PathLike = Union[str, Path]


def _json_bytes(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(
    path: PathLike,
    kind: str,
    config: Dict[str, Any],
    state: Dict[str, np.ndarray],
) -> Path:
    """
    Write a parameter dict and its config to one file.

    Args:
        path: Output file
        kind: "diffusion" or "classifier"
        config: JSON-serializable configuration
        state: Parameter name -> array (order is kept)

    Returns:
        Path written
    """
    path = Path(path)
    manifest = []
    offset = 0
    for name, values in state.items():
        manifest.append({"name": name, "shape": list(values.shape), "offset": offset})
        offset += int(values.size)
    buffer = (
        np.concatenate([np.asarray(v, dtype="<f8").ravel() for v in state.values()])
        if state else np.empty(0, dtype="<f8")
    )

    config_bytes = _json_bytes({"kind": kind, **config})
    manifest_bytes = _json_bytes(manifest)
    blob = b"".join([
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<I", len(config_bytes)), config_bytes,
        struct.pack("<I", len(manifest_bytes)), manifest_bytes,
        struct.pack("<Q", buffer.size), buffer.astype("<f8").tobytes(),
    ])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    logger.debug("Wrote %s checkpoint %s (%d values)", kind, path, buffer.size)
    return path


def load_checkpoint(path: PathLike, kind: str = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Read a checkpoint back.

    Args:
        path: Checkpoint file
        kind: If given, the stored kind must match

    Returns:
        Tuple of (config including "kind", parameter dict)

    Raises:
        FileNotFoundError: If the file does not exist
        FormatError: On bad magic, version, kind or truncated content
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    raw = path.read_bytes()
    try:
        if raw[:4] != MAGIC:
            raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
        (version,) = struct.unpack_from("<H", raw, 4)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        offset = 6
        (length,) = struct.unpack_from("<I", raw, offset)
        config = json.loads(raw[offset + 4:offset + 4 + length].decode("utf-8"))
        offset += 4 + length
        (length,) = struct.unpack_from("<I", raw, offset)
        manifest = json.loads(raw[offset + 4:offset + 4 + length].decode("utf-8"))
        offset += 4 + length
        (count,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: corrupt checkpoint header: {e}") from e

    if len(raw) - offset != count * 8:
        raise FormatError(f"{path}: parameter buffer holds {len(raw) - offset} bytes, expected {count * 8}")
    if kind is not None and config.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind} checkpoint, found {config.get('kind')!r}")

    buffer = np.frombuffer(raw[offset:], dtype="<f8").astype(np.float64)
    state = {}
    for entry in manifest:
        size = int(np.prod(entry["shape"]))
        start = entry["offset"]
        state[entry["name"]] = buffer[start:start + size].reshape(entry["shape"]).copy()
    return config, state
