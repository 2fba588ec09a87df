import pytest

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Register one acceptance line: record(criterion, passed, detail)."""

    def add(name, passed, detail):
        _ACCEPTANCE.append((name, bool(passed), detail))
        print(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'} {detail}")
