import numpy as np
import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""

    def add(criterion, ok, detail=""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return ok

    return add


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: (int(s.split()[1].rstrip(":").rstrip("abc")), s)):
            terminalreporter.write_line(line)
