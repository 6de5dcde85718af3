import re

CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, derived from the test outcomes."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if getattr(report, "when", "call") != "call" and outcome == "passed":
                continue
            m = CRITERION.search(getattr(report, "nodeid", ""))
            if m:
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((int(m.group(1)), f"criterion {m.group(1)} [{m.group(2)}]: {verdict}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(set(lines)):
            terminalreporter.write_line(line)
