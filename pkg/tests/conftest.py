import numpy as np
import pytest
from hypothesis import settings

from csiquant import allocation

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance results collected by tests/test_acceptance.py, printed at the end
ACCEPTANCE_LINES: dict[int, str] = {}

# every run_allocation call made anywhere in the suite, audited by the acceptance tests
ALLOCATION_RUNS: list[dict] = []


def _recording(original):
    def run_allocation(table, init, max_iters=None, tol=allocation.DEFAULT_TOL):
        alloc, history, swaps = original(table, init, max_iters, tol)
        ALLOCATION_RUNS.append({"init": init, "final": alloc, "history": list(history), "swaps": list(swaps),
                                "max_iters": 10 * init.M if max_iters is None else max_iters})
        return alloc, history, swaps
    return run_allocation


def pytest_configure(config):
    allocation.run_allocation = _recording(allocation.run_allocation)


def pytest_collection_modifyitems(config, items):
    # acceptance criteria run last so the audit criteria see every earlier allocation run
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
