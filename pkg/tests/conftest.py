import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_LINES: dict = {}


def record(k: int, name: str, passed: bool, detail: str = ""):
    _LINES[k] = f"criterion {k:>2} {name:<30} {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
