import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance outcome: ``criterion(n, ok, detail)``."""
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
