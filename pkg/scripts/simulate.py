#!/usr/bin/env python3
"""Run the RCBF simulator from a source checkout: ``scripts/simulate.py run --preset mission-b``."""

import sys
from pathlib import Path

# Ensure the project root (which contains the ``rcbf_sim`` package) is importable
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from rcbf_sim.cli import main

if __name__ == "__main__":
    sys.exit(main())
