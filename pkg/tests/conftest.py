import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"ACCEPTANCE {criterion:>3}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int("".join(c for c in k if c.isdigit()))):
        terminalreporter.write_line(_ACCEPTANCE[key])
