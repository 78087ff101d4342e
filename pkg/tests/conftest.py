from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from magicsimplex import pipeline as pl

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def simplex_points(draw, min_value: float = 0.0):
    """Random Bell-diagonal coefficient vectors (float, sum 1)."""
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=9, max_size=9)))
    return w / w.sum()


@st.composite
def grid_numerators(draw, denominator: int = 18):
    """Random integer compositions of ``denominator`` into 9 parts."""
    cuts = sorted(draw(st.lists(st.integers(0, denominator), min_size=8, max_size=8)))
    parts = np.diff([0, *cuts, denominator])
    return np.array(parts, dtype=np.int64)


@pytest.fixture(scope="session")
def cascade():
    return pl.CascadeConfig.default()


@pytest.fixture(scope="session")
def grid6(cascade):
    return pl.classify_grid(pl.GridSpec(Fraction(1, 6)), cascade)


@pytest.fixture(scope="session")
def grid9(cascade):
    return pl.classify_grid(pl.GridSpec(Fraction(1, 9)), cascade)


# acceptance reporting: each criterion records a PASS/FAIL line here
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE.values():
            terminalreporter.write_line(line)
