import pytest

_RESULTS = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(criterion, passed, detail)``."""

    def record(criterion, passed, detail=""):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _RESULTS.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
