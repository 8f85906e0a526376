import numpy as np
import pytest

from noisyfb.channel import ChannelParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def params_m4():
    # nA = 24 over n = 16
    return ChannelParams.from_sigma2(1.5, 0.25, 16, 4)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record (and print) one acceptance result line."""
    def _report(tag, ok, detail=""):
        line = f"criterion {tag}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
