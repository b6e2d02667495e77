import pytest
from hypothesis import HealthCheck, settings

# fixed example sequences so test_output.txt is reproducible
settings.register_profile("repro", derandomize=True, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Log one acceptance criterion's outcome as a single PASS/FAIL line."""

    def _record(criterion: int, passed: bool, detail: str) -> None:
        line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[criterion])
