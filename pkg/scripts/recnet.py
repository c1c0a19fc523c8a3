#!/usr/bin/env python3
"""
RecNet command-line tool

Usage:
    ./scripts/recnet.py synth --seed 7 --out data/synth
    ./scripts/recnet.py train --config configs/run.conf --stage both
    ./scripts/recnet.py gradcheck --variant local
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
