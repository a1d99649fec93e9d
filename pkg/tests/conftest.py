"""Shared pytest wiring: the acceptance suite registers one result line per
criterion, and the terminal summary echoes them even when everything passes
(ordinary prints are swallowed by capture on success)."""

acceptance_lines: list[str] = []


def record_criterion(line: str) -> None:
    acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.write_line(line)
