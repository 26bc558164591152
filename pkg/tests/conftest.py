import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from crave import kernels  # noqa: E402


@pytest.fixture(params=sorted(kernels.available_backends()))
def kernel_impl(request):
    return kernels.available_backends()[request.param]


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict: ``criterion(number, ok, detail)``."""
    def record(number, ok, detail=""):
        _ACCEPTANCE[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
