import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict, printed in the terminal summary."""
    def _report(n: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
