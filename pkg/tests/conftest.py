import os
import time

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance criteria register "criterion N: PASS/FAIL ..." lines here
ACCEPTANCE_LINES: dict[int, str] = {}
SESSION_START = time.perf_counter()
SUITE_BUDGET_S = 180.0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    lines = dict(ACCEPTANCE_LINES)
    if 10 in lines:
        elapsed = time.perf_counter() - SESSION_START
        ok = elapsed < SUITE_BUDGET_S
        line = lines[10]
        if not ok:
            line = line.replace("PASS", "FAIL", 1)
        lines[10] = f"{line}; suite runtime {elapsed:.1f} s (< {SUITE_BUDGET_S:g} s)"
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
