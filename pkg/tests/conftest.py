import time

import numpy as np
import pytest

from sevensins.fixtures import FIG1_Q, INDEFINITE_Q

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}
SUITE_BUDGET_SECONDS = 300.0
_SESSION_START = time.perf_counter()


def record(name: str, ok: bool, detail: str) -> None:
    """Store one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE_RESULTS[name] = (bool(ok), detail)


def random_spd(rng, n, floor=0.1):
    B = rng.standard_normal((n, n))
    Q = B @ B.T / n + floor * np.eye(n)
    return 0.5 * (Q + Q.T)


@pytest.fixture
def fig1_q():
    return FIG1_Q.copy()


@pytest.fixture
def indefinite_q():
    return INDEFINITE_Q.copy()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    elapsed = time.perf_counter() - _SESSION_START
    if "AC10" in ACCEPTANCE_RESULTS:
        ok, detail = ACCEPTANCE_RESULTS["AC10"]
        within = elapsed < SUITE_BUDGET_SECONDS
        ACCEPTANCE_RESULTS["AC10"] = (ok and within, f"{detail}; full suite {elapsed:.1f} s")
    terminalreporter.section("acceptance criteria")
    for k in range(1, 11):
        name = f"AC{k}"
        if name not in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"{name}: FAIL  (not run or errored before measuring)")
            continue
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
