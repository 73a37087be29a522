import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; printed at the end of the session."""
    def record(criterion, ok, detail):
        _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
