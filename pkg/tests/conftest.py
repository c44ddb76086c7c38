import pytest

from deltaprime.model import make_params


@pytest.fixture
def p1():
    """gamma=2, lambda=1, mu=1: omega0 = 1, omega_star = 2."""
    return make_params(2.0, 1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    lines = acceptance_log.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
