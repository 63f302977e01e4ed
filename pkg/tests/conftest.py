from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}

CRITERIA = {
    1: "geometry property suite",
    2: "domain residence and complementarity",
    3: "propagation-of-chaos rate slope",
    4: "two-solver agreement",
    5: "moment clock bounds",
    6: "skeleton concentration ratios",
    7: "Euler-skeleton convergence",
    8: "action functional",
    9: "Kramers slope",
    10: "pre-convergence exit probability",
    11: "Wasserstein oracle equivalence",
    12: "determinism across worker counts",
}


@pytest.fixture
def record_criterion():
    def record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {CRITERIA[number]}: {detail}")

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA[n]}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d} NOT RUN  {CRITERIA[n]}")
