import pytest

# Lines appended by the acceptance suite; echoed in the terminal summary so they
# are visible without ``-s``.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(line: str):
        print(line)
        ACCEPTANCE_LINES.append(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
