import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance verdict line; all lines are printed at session end."""

    def add(criterion: str, ok: bool, detail: str) -> None:
        _LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
