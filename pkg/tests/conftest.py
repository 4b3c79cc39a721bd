import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion and fail the test if it failed."""

    def record(number, name, ok, detail):
        _CRITERIA[number] = ("PASS" if ok else "FAIL", name, detail)
        assert ok, f"criterion {number} ({name}) failed: {detail}"

    return record


def skip_criterion(number, name, reason):
    _CRITERIA[number] = ("SKIP", name, reason)
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, name, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{status} {number:>2} {name}: {detail}")
