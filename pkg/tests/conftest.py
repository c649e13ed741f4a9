"""Collects one verdict line per acceptance criterion and prints them at the end."""
import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, part, ok, detail):
        ACCEPTANCE[(number, part)] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, part), (ok, detail) in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} criterion {number} [{part}]: {detail}")
