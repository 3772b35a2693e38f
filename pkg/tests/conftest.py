import pytest

# One line per acceptance criterion, echoed both at test time and in the
# terminal summary so a plain `pytest -v` run shows every verdict.
_ACCEPTANCE_LINES = []


def _record(criterion, passed, detail):
    line = "[criterion %s] %s: %s" % (criterion, "PASS" if passed else "FAIL", detail)
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture(scope="session")
def acceptance():
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
