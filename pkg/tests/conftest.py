import pytest

# one line per acceptance criterion, echoed at the end of the run
_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print a PASS/FAIL line, then fail the test if needed."""

    def record(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
