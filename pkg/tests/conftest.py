"""Shared fixtures; collects one pass/fail line per acceptance criterion."""
import pytest

_ACCEPTANCE = {}


class AcceptanceLog:
    """Records the outcome of each acceptance criterion for the summary."""

    def check(self, number, title, ok, detail):
        _ACCEPTANCE[number] = (title, bool(ok), detail)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
