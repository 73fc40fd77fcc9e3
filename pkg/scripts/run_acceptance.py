"""Run the acceptance suite and print its per-criterion verdict lines.

Extra arguments go to pytest, e.g. ``-k criterion_7``.
"""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", *sys.argv[1:]]))
