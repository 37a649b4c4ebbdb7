import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ldplab.spectral import build_basis  # noqa: E402


@pytest.fixture(scope="session")
def basis1():
    return build_basis(1)


@pytest.fixture(scope="session")
def basis8():
    return build_basis(8)


@pytest.fixture(scope="session")
def basis32():
    return build_basis(32)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
