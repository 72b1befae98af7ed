import pytest

VERDICTS = []


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` for the end-of-run table."""
    def record(name, passed, detail=""):
        VERDICTS.append((name, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
