import sys
from pathlib import Path

import pytest

from crgame import mirrored_spec

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def pool3():
    """Three customers, tables of 100 and 40, signal quality 0.9."""
    return mirrored_spec(3, 0.9, 0.4)


@pytest.fixture
def report():
    def _report(name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
