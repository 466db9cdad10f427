"""
EEG module: recordings, short-time Fourier analysis and synthetic data
"""

from .recording import (
    Recording,
    load_recording,
    load_text_recording,
    load_binary_recording,
    save_binary_recording,
    save_text_recording,
)
from .stft import Spectrogram, stft, magnitude, fft, dft, default_wsize
from .datagen import ClassBand, SynthSpec, XorshiftGenerator, generate, generate_all

__all__ = [
    "Recording",
    "load_recording",
    "load_text_recording",
    "load_binary_recording",
    "save_binary_recording",
    "save_text_recording",
    "Spectrogram",
    "stft",
    "magnitude",
    "fft",
    "dft",
    "default_wsize",
    "ClassBand",
    "SynthSpec",
    "XorshiftGenerator",
    "generate",
    "generate_all",
]
