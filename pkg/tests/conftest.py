VERDICT_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts after the test summary, where output
    capture no longer swallows them."""
    if VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_LINES:
            terminalreporter.write_line(line)
