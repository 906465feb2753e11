import numpy as np
import pytest

from goaltrack import _kernels
from goaltrack.env import EnvConfig


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    """Run the test once through each kernel implementation."""
    monkeypatch.setattr(_kernels, "USE_NUMBA", request.param == "numba")
    return request.param


@pytest.fixture
def cfg():
    return EnvConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def _report(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f" | {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
