import sys

import pytest

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request, capsys):
    """Record and immediately print one PASS/FAIL line for an acceptance criterion."""
    def report(number: int, ok: bool, detail: str):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE[number] = line
        with capsys.disabled():
            sys.stdout.write("\n" + line + "\n")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
