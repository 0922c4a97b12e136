import sys

import hypothesis.strategies as st
import pytest
from hypothesis import settings

from riesz_lab import make_params, sample_realization

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def small_params(draw, max_stages=4, max_p=4, max_t=4):
    """Random small constructions with uniform xi on each X_k."""
    K = draw(st.integers(1, max_stages))
    p = draw(st.lists(st.integers(2, max_p), min_size=K, max_size=K))
    t = draw(st.lists(st.sampled_from(range(0, max_t + 1, 2)), min_size=K, max_size=K))
    x_top = draw(st.lists(st.integers(0, 3), min_size=K, max_size=K))
    return make_params(p, t, x_top, "uniform")


@st.composite
def params_and_omega(draw, **kw):
    params = draw(small_params(**kw))
    seed = draw(st.integers(0, 2**32 - 1))
    return params, sample_realization(params, seed)


@pytest.fixture
def odometer():
    return make_params(2, 0, 0, "point", stages=6)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
