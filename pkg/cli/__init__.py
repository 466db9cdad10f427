"""
Command-line interface for the EFDM diffusion pipeline
"""

from .app import build_parser, run_cli, setup_logging, main
from .components import ProgressReporter

__all__ = ["build_parser", "run_cli", "setup_logging", "main", "ProgressReporter"]
