CRITERIA = []


def report(label, ok, detail):
    """Record and print one acceptance line; the terminal summary repeats them."""
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
