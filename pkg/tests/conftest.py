import pytest

# Acceptance tests append (number, title, passed, detail) here; the lines are
# printed in the terminal summary so one run shows the whole scorecard.
ACCEPTANCE_LINES: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d} {title}: {detail}")


@pytest.fixture
def record_acceptance():
    def record(num: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append((num, title, bool(ok), detail))

    return record


@pytest.fixture(scope="session")
def full_verify():
    """One default ``verify`` run through the installed entry point, timed."""
    import subprocess
    import sys
    import time

    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "ssfinsler", "verify", "--no-meta"], capture_output=True, text=True, timeout=600
    )
    return proc, time.perf_counter() - t0
