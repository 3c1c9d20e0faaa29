"""Collects one verdict line per acceptance criterion and prints them at the end."""

ACCEPTANCE = {}


def record(number, verdict, detail):
    line = f"criterion {number:>2}: {verdict:<4} {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
