import re

import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(id, passed, detail)."""

    def record(cid: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((cid, bool(passed), detail))
        return bool(passed)

    return record


def _order(row):
    num, rest = re.match(r"(\d+)(.*)", row[0]).groups()
    return int(num), rest


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(_ACCEPTANCE, key=_order):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {detail}")
