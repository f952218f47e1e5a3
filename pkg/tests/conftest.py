import pytest

ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line; it is echoed in the terminal summary."""

    def _report(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} | {detail}"
        ACCEPTANCE.append((number, line))
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
