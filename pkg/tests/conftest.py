import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_details: dict[str, str] = {}
_lines: list[str] = []


@pytest.fixture
def record(request):
    """Attach a one-line detail to the running acceptance criterion."""

    def put(detail: str):
        _details[request.node.nodeid] = detail

    return put


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = report.keywords.get("criterion")
    if marker is None:
        return
    number = next((m.args[0] for m in _markers(report) if m.name == "criterion"), "?")
    status = "PASS" if report.passed else "FAIL"
    line = f"criterion {number:>2}: {status}  {_details.get(report.nodeid, '')}".rstrip()
    _lines.append((number, line))
    print("\n" + line)


_node_markers: dict[str, list] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        _node_markers[item.nodeid] = list(item.iter_markers())


def _markers(report):
    return _node_markers.get(report.nodeid, [])


def pytest_terminal_summary(terminalreporter):
    if not _lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
