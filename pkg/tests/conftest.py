import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report_check():
    """Record a verification Check; its one-line verdict is printed in the session summary."""

    def record(check):
        line = check.line()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return check

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
