import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def report():
    def _report(key: str, ok: bool, detail: str):
        ACCEPTANCE_LINES[key] = f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}"
        print(ACCEPTANCE_LINES[key])
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0][2:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
