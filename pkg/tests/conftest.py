import numpy as np
import pytest
from hypothesis import settings

from rankagg.perm import Permutation

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def perm(*xs: int) -> Permutation:
    return Permutation(tuple(xs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
