import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_problem(seed, d=6, n=8, m=3):
    r = np.random.default_rng(seed)
    W = r.random((d, n)) + 0.05
    X = r.random((d, m))
    return X, W


ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    """Store the PASS/FAIL line of an acceptance criterion for the summary."""
    ACCEPTANCE_LINES[number] = f"acceptance {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def acceptance():
    return record_acceptance
