import pytest

from fpb_probe.analytics import pe_grid

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def grid():
    return pe_grid()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
