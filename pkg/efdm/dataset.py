"""
Labelled EFDM collections and their packed binary file format

File layout (little-endian throughout):
    "EFDM" | u16 version | u32 count | u16 height | u16 width | u8 class count
    class names: u8 byte length + UTF-8 bytes, repeated
    items: u8 label index + height*width raw pixels, repeated
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import FormatError, ValidationError
from .maps import Efdm, pixels_to_float

logger = logging.getLogger(__name__)

MAGIC = b"EFDM"
VERSION = 1
HEADER = struct.Struct("<4sHIHHB")

PathLike = Union[str, Path]


def fingerprint(e: Efdm) -> str:
    """
    Content hash of the pixel bytes (label and metadata excluded).
    """
    return hashlib.sha256(np.ascontiguousarray(e.pixels).tobytes()).hexdigest()


@dataclass
class EfdmDataset:
    items: List[Efdm] = field(default_factory=list)
    class_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.items = list(self.items)
        self.class_names = list(self.class_names)
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError(f"duplicate class names in {self.class_names}")
        shapes = {e.shape for e in self.items}
        if len(shapes) > 1:
            raise ValidationError(f"EFDMs in one dataset must share a shape, got {sorted(shapes)}")
        unknown = {e.label for e in self.items} - set(self.class_names)
        if unknown:
            raise ValidationError(f"labels {sorted(unknown)} are not in the vocabulary {self.class_names}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, index: int) -> Efdm:
        return self.items[index]

    @property
    def image_shape(self) -> Optional[Tuple[int, int]]:
        return self.items[0].shape if self.items else None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_indices(self) -> np.ndarray:
        lookup = {name: i for i, name in enumerate(self.class_names)}
        return np.array([lookup[e.label] for e in self.items], dtype=np.int64)

    def class_counts(self) -> Dict[str, int]:
        counts = {name: 0 for name in self.class_names}
        for e in self.items:
            counts[e.label] += 1
        return counts

    def pixel_stack(self) -> np.ndarray:
        """
        N x H x W uint8.
        """
        if not self.items:
            raise ValidationError("dataset is empty")
        return np.stack([e.pixels for e in self.items])

    def to_array(self, planes: int = 3, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        N x planes x H x W float64 in [-1, 1].
        """
        stack = self.pixel_stack() if indices is None else np.stack([self.items[i].pixels for i in indices])
        scaled = pixels_to_float(stack)
        return np.repeat(scaled[:, None, :, :], planes, axis=1)

    def fingerprints(self) -> List[str]:
        return [fingerprint(e) for e in self.items]

    def subset(self, indices: Iterable[int]) -> "EfdmDataset":
        return EfdmDataset([self.items[i] for i in indices], self.class_names)

    def by_label(self, label: str) -> "EfdmDataset":
        return EfdmDataset([e for e in self.items if e.label == label], self.class_names)

    def merge(self, other: "EfdmDataset") -> "EfdmDataset":
        """
        Concatenate two datasets over the union of their vocabularies.
        """
        names = self.class_names + [c for c in other.class_names if c not in self.class_names]
        return EfdmDataset(self.items + other.items, names)

    def aligned_to(self, class_names: Sequence[str]) -> "EfdmDataset":
        """
        Same items under another ordering of the same vocabulary.

        Raises:
            ValidationError: If the two vocabularies hold different names
        """
        if sorted(class_names) != sorted(self.class_names):
            raise ValidationError(f"vocabulary {self.class_names} does not match {list(class_names)}")
        return EfdmDataset(self.items, class_names)

    def split_per_class(self, first: int, second: Optional[int] = None) -> Tuple["EfdmDataset", "EfdmDataset"]:
        """
        Take the first ``first`` items of each class, and the next
        ``second`` (or all remaining) into a second dataset. Order is kept.

        Raises:
            ValidationError: If a class has fewer items than requested
        """
        taken: Dict[str, int] = {name: 0 for name in self.class_names}
        head, tail = [], []
        for e in self.items:
            seen = taken[e.label]
            if seen < first:
                head.append(e)
            elif second is None or seen < first + second:
                tail.append(e)
            taken[e.label] = seen + 1
        short = {n: c for n, c in taken.items() if c < first + (second or 0)}
        if short:
            raise ValidationError(f"classes {short} have too few items for a {first}/{second} split")
        return EfdmDataset(head, self.class_names), EfdmDataset(tail, self.class_names)

    def relabel(self, labels: Sequence[str]) -> "EfdmDataset":
        if len(labels) != len(self.items):
            raise ValidationError(f"{len(labels)} labels for {len(self.items)} items")
        return EfdmDataset(
            [Efdm(e.pixels, label=lab, meta=e.meta) for e, lab in zip(self.items, labels)],
            self.class_names,
        )


def save_dataset(dataset: EfdmDataset, path: PathLike) -> Path:
    """
    Write the packed binary format.

    Raises:
        ValidationError: If the dataset has more than 255 classes or a
            class name exceeds 255 bytes
    """
    path = Path(path)
    if dataset.n_classes > 255:
        raise ValidationError(f"at most 255 classes fit the format, got {dataset.n_classes}")
    height, width = dataset.image_shape or (0, 0)

    chunks = [HEADER.pack(MAGIC, VERSION, len(dataset), height, width, dataset.n_classes)]
    for name in dataset.class_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 255:
            raise ValidationError(f"class name too long for the format: {name[:32]}...")
        chunks.append(struct.pack("<B", len(encoded)) + encoded)
    labels = dataset.label_indices().astype(np.uint8)
    for label, e in zip(labels, dataset.items):
        chunks.append(bytes([int(label)]) + np.ascontiguousarray(e.pixels).tobytes())

    path.write_bytes(b"".join(chunks))
    logger.info("✓ Saved %d EFDMs (%dx%d, %d classes) to %s", len(dataset), height, width, dataset.n_classes, path)
    return path


def load_dataset(path: PathLike) -> EfdmDataset:
    """
    Read a packed EFDM dataset file.

    Raises:
        FileNotFoundError: If the file does not exist
        FormatError: On bad magic, unknown version or truncated content
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: too short for a dataset header")
    magic, version, count, height, width, n_classes = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")

    offset = HEADER.size
    names = []
    for _ in range(n_classes):
        if offset >= len(raw):
            raise FormatError(f"{path}: truncated class vocabulary")
        length = raw[offset]
        try:
            names.append(raw[offset + 1:offset + 1 + length].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError(f"{path}: class name {len(names)} is not valid UTF-8") from e
        offset += 1 + length

    record = 1 + height * width
    if len(raw) - offset != count * record:
        raise FormatError(f"{path}: {len(raw) - offset} body bytes, header implies {count * record}")
    body = np.frombuffer(raw[offset:], dtype=np.uint8).reshape(count, record) if count else np.empty((0, record), np.uint8)
    if count and body[:, 0].max() >= n_classes:
        raise FormatError(f"{path}: label index outside the {n_classes}-class vocabulary")
    items = [
        Efdm(row[1:].reshape(height, width).copy(), label=names[row[0]], meta={"index": i})
        for i, row in enumerate(body)
    ]
    logger.debug("Loaded %d EFDMs from %s", count, path)
    return EfdmDataset(items, names)
