import numpy as np
import pytest
from hypothesis import settings

from georamsey.core import BeamGeometry, PulseSchedule, strontium87

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

_ACCEPTANCE = []


@pytest.fixture
def schedule():
    return PulseSchedule()


@pytest.fixture
def species():
    return strontium87()


@pytest.fixture
def geometry():
    return BeamGeometry()


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def assert_close_scaled(actual, expected, rtol):
    """Entrywise relative check with zero entries measured against the matrix scale."""
    actual, expected = np.asarray(actual), np.asarray(expected)
    scale = max(float(np.max(np.abs(expected))), 1e-300)
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=rtol * scale * 1e-2)
