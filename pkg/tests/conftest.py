import sys

import numpy as np
import pytest

from hybridspec.model import flipchip_params


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def s1():
    """Flip-chip parameters for the middle cut (w_a/2pi = 2.589 GHz)."""
    return flipchip_params(1)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
