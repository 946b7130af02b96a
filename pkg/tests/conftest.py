import numpy as np
import pytest

from smallspec.construction import SchedulerPolicy, run


def raster(pairs, lo=-10_000, hi=10_000):
    """Unit cells [x, x+1) covered by a union of closed integer intervals."""
    cells = np.zeros(hi - lo, dtype=bool)
    for a, b in pairs:
        cells[a - lo : b - lo] = True
    return cells


@pytest.fixture(scope="session")
def minimal4():
    return run(4, policy=SchedulerPolicy("minimal"))


@pytest.fixture(scope="session")
def minimal2():
    return run(2, half_width=64.0)


@pytest.fixture(scope="session")
def k10_stage1():
    return run(1, half_width=64.0, k_seq=[10])


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, passed, detail):
        lines.append((number, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
