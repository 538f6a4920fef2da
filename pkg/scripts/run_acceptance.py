"""Run the acceptance suite and print one line per criterion."""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(pytest.main(["-q", str(ROOT / "tests" / "test_acceptance.py"), *sys.argv[1:]]))
