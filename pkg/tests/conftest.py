import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test when the check does not hold."""
    def check(cid: str, label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  [{cid}] {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in _CRITERIA:
        terminalreporter.write_line(line)
    failed = sum(line.startswith("FAIL") for line in _CRITERIA)
    terminalreporter.write_line(f"{len(_CRITERIA) - failed} passed, {failed} failed")
