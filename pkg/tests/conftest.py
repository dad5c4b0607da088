import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from stlkernel.formula import GEQ, LEQ, And, Atom, Eventually, Globally, Not, Or, TimeWindow, TrueF, Until

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=20, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

thresholds = st.floats(-7, 7, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 3))


@st.composite
def windows(draw, max_hi=12):
    lo = draw(st.integers(0, max_hi - 1))
    hi = draw(st.integers(lo + 1, max_hi))
    return TimeWindow(float(lo), float(hi))


def formulas(max_leaves=8, allow_true=False, windowed=True):
    """Random STL formulae over the full grammar."""
    leaf = st.builds(Atom, st.sampled_from([GEQ, LEQ]), thresholds)
    if allow_true:
        leaf = st.one_of(leaf, st.just(TrueF()))
    win = st.one_of(st.none(), windows()) if windowed else st.none()

    def extend(children):
        return st.one_of(
            st.builds(Not, children),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Until, children, children, win),
            st.builds(Eventually, children, win),
            st.builds(Globally, children, win),
        )

    return st.recursive(leaf, extend, max_leaves=max_leaves)


def signals(min_len=1, max_len=25):
    """Grid values; small integers and halves create many exact ties."""
    elem = st.one_of(st.integers(-5, 5).map(float), st.floats(-8, 8, allow_nan=False, allow_infinity=False))
    return st.lists(elem, min_size=min_len, max_size=max_len).map(lambda v: np.array(v, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
