"""
Image export of EFDMs for visual inspection
"""

from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image

from errors import ValidationError
from .maps import Efdm, to_rgb_triple

PathLike = Union[str, Path]


def _format_for(path: Path) -> str:
    return "PNG" if path.suffix.lower() == ".png" else "PPM"


def save_pgm(e: Efdm, path: PathLike) -> Path:
    """
    Grayscale binary PGM (P5).
    """
    path = Path(path)
    Image.fromarray(np.ascontiguousarray(e.pixels)).save(path, format="PPM")
    return path


def save_ppm(e: Efdm, path: PathLike) -> Path:
    """
    RGB binary PPM (P6) of the replicated three-plane image.
    """
    path = Path(path)
    rgb = to_rgb_triple(e).transpose(1, 2, 0)
    Image.fromarray(np.ascontiguousarray(rgb)).save(path, format="PPM")
    return path


def tile(efdms: Sequence[Efdm], columns: int, gap: int = 2) -> np.ndarray:
    """
    Arrange maps on a grid separated by ``gap`` white pixels.
    """
    if not efdms:
        raise ValidationError("nothing to tile")
    h, w = efdms[0].shape
    rows = -(-len(efdms) // columns)
    canvas = np.full((rows * h + (rows - 1) * gap, columns * w + (columns - 1) * gap), 255, dtype=np.uint8)
    for i, e in enumerate(efdms):
        r, c = divmod(i, columns)
        canvas[r * (h + gap):r * (h + gap) + h, c * (w + gap):c * (w + gap) + w] = e.pixels
    return canvas


def save_grid(efdms: Sequence[Efdm], path: PathLike, columns: int = 4) -> Path:
    """
    Preview grid of several maps (PNG by suffix, PGM otherwise).
    """
    path = Path(path)
    Image.fromarray(tile(efdms, columns)).save(path, format=_format_for(path))
    return path


def save_comparison(synthetic: Efdm, original: Efdm, path: PathLike) -> Path:
    """
    Synthetic map on the left, original on the right, as one RGB image.
    """
    if synthetic.shape != original.shape:
        raise ValidationError(f"cannot compare maps of shapes {synthetic.shape} and {original.shape}")
    path = Path(path)
    gray = tile([synthetic, original], columns=2, gap=4)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    Image.fromarray(rgb).save(path, format=_format_for(path))
    return path
