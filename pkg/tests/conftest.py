from __future__ import annotations

import pytest

# criterion number -> (passed, summary); filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, passed: bool, summary: str) -> bool:
        prev = ACCEPTANCE.get(number)
        if prev is not None:
            passed, summary = prev[0] and passed, f"{prev[1]}; {summary}"
        ACCEPTANCE[number] = (bool(passed), summary)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, summary = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {summary}")
