"""
EFDM module: map construction, datasets and image export
"""

from .maps import Efdm, build_efdms, to_rgb_triple, to_float_tensor, quantize, float_to_pixels
from .dataset import EfdmDataset, fingerprint, save_dataset, load_dataset
from .export import save_pgm, save_ppm, save_grid, save_comparison

__all__ = [
    "Efdm",
    "build_efdms",
    "to_rgb_triple",
    "to_float_tensor",
    "quantize",
    "float_to_pixels",
    "EfdmDataset",
    "fingerprint",
    "save_dataset",
    "load_dataset",
    "save_pgm",
    "save_ppm",
    "save_grid",
    "save_comparison",
]
