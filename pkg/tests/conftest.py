import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sparsedom import CoefficientSequence, GridFunction, RootCube  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> PASS/FAIL line, filled by test_acceptance
ACCEPTANCE_LINES: dict = {}


def leaf_dict(f: GridFunction) -> dict:
    return {tuple(int(i) for i in idx): Fraction(f.values[idx]) for idx in np.ndindex(*f.values.shape)}


def alpha_dict(alpha: CoefficientSequence) -> dict:
    return {(q.level, tuple(int(i) for i in q.index)): Fraction(v) for q, v in alpha.support()}


def j2_alpha(value=1):
    root = RootCube(1, depth=2)
    return CoefficientSequence.from_mapping(root, {c: value for j in (1, 2) for c in root.cubes(j)})


@pytest.fixture
def j2():
    """d=1, J=2, f = 1, alpha = 1 on every cube of levels 1 and 2 (norm 2)."""
    alpha = j2_alpha()
    return alpha, GridFunction.constant(alpha.root, 1)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
