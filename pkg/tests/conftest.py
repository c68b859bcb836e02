import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


class _Criterion:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            status = "PASS"
        else:
            status = "FAIL"
            first = str(exc).strip().splitlines()[0] if str(exc).strip() else exc_type.__name__
            self.details.append(first[:160])
        _RESULTS[self.number] = (status, self.title, "; ".join(self.details))
        return False


@pytest.fixture
def criterion():
    """Context manager recording a pass/fail line for one acceptance criterion."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"{status} criterion {number}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
