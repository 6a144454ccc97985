"""
Launcher for the mtf command line.

    python mtf.py selftest
    python mtf.py solve --config configs/solve.yaml --out output/solve
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
