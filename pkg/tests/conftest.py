import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Callable (criterion, ok, detail) that records one PASS/FAIL line."""
    def record(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
