import pytest

from sociallearn.signals import BoundedLinear, LinearUnbounded


@pytest.fixture
def lin():
    return LinearUnbounded()


@pytest.fixture
def half():
    return BoundedLinear(0.5)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
