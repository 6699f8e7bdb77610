import re

import pytest

_LINES: dict[str, str] = {}


@pytest.fixture
def acceptance(request):
    """``record(tag, ok, detail)`` prints and stores one verdict line per criterion."""
    seen = []

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"{tag:<5} {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[tag] = line
        seen.append(tag)
        print(line)
        return ok

    yield record
    if not seen:
        m = re.search(r"ac(\d+)", request.node.name)
        if m:
            tag = f"AC{int(m.group(1))}"
            _LINES[tag] = f"{tag:<5} FAIL  no verdict (the check raised before finishing)"


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(_LINES, key=lambda t: int(t[2:])):
        terminalreporter.write_line(_LINES[tag])
