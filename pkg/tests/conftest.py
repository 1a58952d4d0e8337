import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance_lines: list[str] = []


class CriterionRecorder:
    """Prints and remembers one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.details: list[str] = []

    def note(self, text: str):
        self.details.append(text)

    def finish(self, ok: bool):
        detail = f" ({'; '.join(self.details)})" if self.details else ""
        line = f"{'PASS' if ok else 'FAIL'} criterion {self.number}: {self.title}{detail}"
        print(line)
        _acceptance_lines.append(line)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    rec = CriterionRecorder(*marker.args)
    yield rec
    report = getattr(request.node, "rep_call", None)
    rec.finish(report is not None and report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
