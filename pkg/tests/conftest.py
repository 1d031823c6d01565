import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE.append((number, ok, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")
