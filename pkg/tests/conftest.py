from acceptance_log import RESULTS

N_CRITERIA = 10


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in RESULTS:
            title, ok, detail = RESULTS[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {n:>2}. {title} | {detail}")
        else:
            terminalreporter.write_line(f"NOT RUN {n:>2}.")
