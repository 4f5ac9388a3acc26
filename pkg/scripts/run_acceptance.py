"""Run the acceptance suite, including the slow rough-Bergomi criterion.

    python scripts/run_acceptance.py [extra pytest args]
"""
import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-m", "", "-q", *sys.argv[1:]]))
