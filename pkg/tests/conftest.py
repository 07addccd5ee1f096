import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)``; lines are echoed in the terminal summary."""
    def record(num: int, passed: bool, detail: str = "") -> None:
        VERDICTS[num] = (bool(passed), detail)
        print(f"criterion {num}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(VERDICTS):
        ok, detail = VERDICTS[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
