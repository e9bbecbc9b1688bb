import contextlib

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)


@pytest.fixture
def criterion():
    """Context manager that records PASS/FAIL of one acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        c = _Criterion(number, title)
        try:
            yield c
        except BaseException:
            _RESULTS[number] = ("FAIL", _line(c))
            raise
        _RESULTS[number] = ("PASS", _line(c))

    return record


def _line(c: _Criterion) -> str:
    detail = f" ({'; '.join(c.notes)})" if c.notes else ""
    return f"criterion {c.number}: {c.title}{detail}"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, line = _RESULTS[number]
        terminalreporter.write_line(f"{status} {line}")
