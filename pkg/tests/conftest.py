import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_CRITERIA: dict[str, dict[str, tuple[bool, str]]] = {}


@pytest.fixture
def report():
    """Record one (sub)check of an acceptance criterion and print its line."""

    def _report(number: int, ok: bool, detail: str, part: str = "") -> bool:
        _CRITERIA.setdefault(str(number), {})[part] = (bool(ok), detail)
        print(f"criterion {number}{part}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=int):
        parts = _CRITERIA[number]
        ok = all(p[0] for p in parts.values())
        detail = "; ".join(p[1] for p in parts.values())
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
