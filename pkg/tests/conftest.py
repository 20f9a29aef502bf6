import zlib

import numpy as np
import pytest


@pytest.fixture
def rng(request):
    # a distinct, stable stream per test
    return np.random.default_rng(zlib.crc32(request.node.nodeid.encode()))


def pytest_terminal_summary(terminalreporter):
    report = getattr(__import__("sys").modules.get("test_acceptance"), "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])
