import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by tests/test_acceptance.py
_ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_ACCEPTANCE_TOTAL = 10


@pytest.fixture
def criterion():
    def record(num: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    ran = [r for reps in terminalreporter.stats.values() for r in reps if "test_acceptance" in getattr(r, "nodeid", "")]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, _ACCEPTANCE_TOTAL + 1):
        if k in _ACCEPTANCE:
            ok, detail = _ACCEPTANCE[k]
            terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {k:2d}: FAIL  (no result recorded: errored or not selected)")
