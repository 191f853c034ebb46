import numpy as np
import pytest

from eemimo import HardwareProfile, PropagationScenario


@pytest.fixture(scope="session")
def hw():
    return HardwareProfile()


@pytest.fixture(scope="session")
def disc():
    return PropagationScenario.disc()


@pytest.fixture(scope="session")
def square():
    return PropagationScenario.square()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip tests marked slow")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    skip = pytest.mark.skip(reason="--skip-slow given")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line per acceptance criterion.

    Call ``report(number, passed, detail)``; the lines are printed in the
    terminal summary, so they appear even when output is captured.
    """
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def _report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
