"""
Hardware detection and thread-count resolution for CPU training
"""

import logging
import os
import platform
from typing import Any, Dict

import numpy as np

import config

logger = logging.getLogger(__name__)


def detect_hardware() -> Dict[str, Any]:
    """
    Describe the CPU the pipeline will run on.

    Returns:
        Dict containing cpu count, machine, and numpy version
    """
    cpu_count = os.cpu_count() or 1
    hardware_info = {
        "device": "cpu",
        "cpu_count": cpu_count,
        "machine": platform.machine() or "unknown",
        "numpy": np.__version__,
    }
    logger.debug("CPU detected: %d logical cores (%s)", cpu_count, hardware_info["machine"])
    return hardware_info


def resolve_threads(requested: int = config.DEFAULT_THREADS) -> int:
    """
    Cap the requested worker count at the available cores.

    Args:
        requested: Thread count from --threads (values < 1 mean "all cores")

    Returns:
        Number of worker threads to use
    """
    available = detect_hardware()["cpu_count"]
    if requested < 1:
        return available
    if requested > available:
        logger.warning("⚠ %d threads requested but only %d cores available; using %d",
                       requested, available, available)
        return available
    return requested


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG)
    print(detect_hardware())
    print(f"Threads for --threads 0: {resolve_threads(0)}")
