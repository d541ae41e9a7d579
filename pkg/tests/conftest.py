import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tablegru import kernels  # noqa: E402


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available scan backend."""
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record the verdict of one acceptance criterion for the summary."""
    def record(ok, detail):
        ACCEPTANCE.append((request.node.name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
