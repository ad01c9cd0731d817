import pytest

_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record and print one pass/fail line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str, elapsed: float):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f} s)"
        _LINES.append(line)
        print(line)
        return line
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
