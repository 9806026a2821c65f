import pytest

REPORT: dict = {}


@pytest.fixture
def report():
    """Record one status line per acceptance criterion."""

    def record(num, ok, detail):
        REPORT[num] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(REPORT):
        ok, detail = REPORT[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
