import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dyadmesh import RefinementBounds, build_matrix  # noqa: E402

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def cached_matrix(d, l_min, l_max, m_r=1):
    return build_matrix(RefinementBounds(d, l_min, l_max, m_r))


@pytest.fixture
def example_1d():
    """1D family with levels 0..3; regularity 2 admits the grid {2, 12, 13, 7}."""
    return cached_matrix(1, 0, 3, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
