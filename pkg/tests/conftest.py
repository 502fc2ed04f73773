"""Shared pytest hooks: acceptance criteria report their verdict lines here."""

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, line: str) -> None:
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
