import os

import pytest
from hypothesis import HealthCheck, settings

from gaussmap.catalog import builtin

settings.register_profile("default", deadline=None, print_blob=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CATALOG = ("catenoid", "enneper", "enneper2", "enneper3")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reports():
    """Vertical analyses of the catalog surfaces, computed once."""
    from gaussmap.invariants import analyze

    cache: dict = {}

    def get(name: str):
        if name not in cache:
            cache[name] = analyze(builtin(name))
        return cache[name]

    return get
