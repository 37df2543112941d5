import pytest

CRITERIA = []


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
