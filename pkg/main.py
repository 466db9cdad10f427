#!/usr/bin/env python3
"""
EEG EFDM Diffusion Toolbox
Electrode-frequency distribution maps, diffusion-model synthesis and
augmentation experiments from the command line.
"""

import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from cli import run_cli


def main():
    """
    Main entry point for the application.
    """
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
