import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the summary prints them after the run."""

    def record(label, ok, detail):
        _VERDICTS.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
