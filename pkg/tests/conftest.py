import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bernshift.measure import ProductMeasure
from bernshift.rules import Table

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIRST_HALF = ProductMeasure(Table(np.array([0.5]), 0.0), label="first-half")


@pytest.fixture
def first_half():
    return FIRST_HALF


def bias_tables(max_len=24, bound=0.9):
    """Hypothesis strategy for finite bias tables with a constant tail."""
    val = st.floats(-bound, bound, allow_nan=False)
    return st.builds(
        lambda a, tail: ProductMeasure(Table(np.array(a), tail)),
        st.lists(val, min_size=0, max_size=max_len),
        val,
    )


# -- acceptance reporting ------------------------------------------------------------

_LINES = []


@contextmanager
def _criterion(number, title, limit):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        if status == "PASS" and elapsed >= limit:
            status = "FAIL"
        _LINES.append((number, f"[criterion {number:2d}] {status} {title} ({elapsed:.2f}s, limit {limit:g}s)"))
    assert elapsed < limit, f"criterion {number} took {elapsed:.1f}s (limit {limit}s)"


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
