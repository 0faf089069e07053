import pytest

_acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL/SKIP line for an acceptance criterion."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}".rstrip(": ")
        _acceptance_lines.append(line)
        print(line)
        return ok

    def skip(label, reason):
        line = f"[SKIP] {label}: {reason}"
        _acceptance_lines.append(line)
        print(line)
        pytest.skip(reason)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
