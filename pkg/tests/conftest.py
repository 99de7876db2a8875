import logging

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

CRITERIA = {}


def record(number, ok, detail=""):
    CRITERIA[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _quiet_class_warnings():
    logging.getLogger("copostab.lcp").setLevel(logging.ERROR)
    yield


def random_p_matrix(rng, n):
    """Random P-matrix: positive diagonal dominating the rows."""
    r = rng.uniform(-1, 1, (n, n))
    np.fill_diagonal(r, 0.0)
    return r + np.diag(np.abs(r).sum(axis=1) + rng.uniform(0.2, 1.5, n))
