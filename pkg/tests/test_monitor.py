import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import formulas, signals, windows
from stl_oracle import oracle_robustness, oracle_satisfaction
from stlkernel.formula import GEQ, LEQ, And, Atom, Eventually, Globally, Not, Or, TimeWindow, TrueF, Until, max_abs_threshold
from stlkernel.monitor import (
    boolean_sat,
    boolean_signal,
    robustness,
    robustness_batch,
    robustness_signal,
    window_offsets,
)
from stlkernel.trajectories import Trajectory


def traj(values, h=1.0):
    return Trajectory(0.0, h, np.asarray(values, dtype=float))


def test_atom_and_negation_examples():
    xi = traj(np.full(21, 2.0))
    assert robustness(Atom(GEQ, 1.5), xi) == 0.5
    assert robustness(Not(Atom(GEQ, 1.5)), xi) == -0.5
    assert boolean_sat(Atom(GEQ, 1.5), xi)
    assert boolean_sat(TrueF(), xi)
    assert robustness(TrueF(), xi) == math.inf


def test_eventually_on_linear_ramp():
    xi = traj(np.linspace(0.0, 3.0, 21))
    expected = max(v - 1.5 for v in xi.values)
    assert robustness(Eventually(Atom(GEQ, 1.5)), xi) == expected == 1.5


def test_signal_examples():
    xi = traj([1.0, -1.0, 2.0])
    np.testing.assert_array_equal(robustness_signal(Atom(GEQ, 0), xi), [1, -1, 2])
    np.testing.assert_array_equal(robustness_signal(Globally(Atom(GEQ, 0)), xi), [-1, -1, 2])
    np.testing.assert_array_equal(boolean_signal(Globally(Atom(GEQ, 0)), xi), [False, False, True])


def test_until_matches_oracle_on_example():
    rng = np.random.default_rng(3)
    f = Until(Atom(GEQ, 0), Atom(GEQ, 2))
    for _ in range(20):
        x = rng.normal(0, 2, 21)
        np.testing.assert_array_equal(robustness_signal(f, traj(x)), oracle_robustness(f, x))


def test_empty_windows():
    xi = traj([0.0, 1.0, 2.0])
    w = TimeWindow(5, 6)
    assert robustness(Eventually(Atom(GEQ, 0), w), xi) == -math.inf
    assert robustness(Until(Atom(GEQ, 0), Atom(GEQ, 0), w), xi) == -math.inf
    assert robustness(Globally(Atom(GEQ, 0), w), xi) == math.inf
    assert not boolean_sat(Eventually(Atom(GEQ, 0), w), xi)
    assert boolean_sat(Globally(Atom(GEQ, 0), w), xi)


def test_window_offsets():
    assert window_offsets(None, 1.0, 21) == (0, 20)
    assert window_offsets(TimeWindow(0, 5), 1.0, 21) == (0, 5)
    assert window_offsets(TimeWindow(0.5, 2.5), 1.0, 21) == (1, 2)
    assert window_offsets(TimeWindow(0.3, 0.9), 0.1, 21) == (3, 9)
    lo, hi = window_offsets(TimeWindow(25, 30), 1.0, 21)
    assert hi < lo


def test_index_errors():
    xi = traj([0.0, 1.0])
    with pytest.raises(IndexError):
        robustness(Atom(GEQ, 0), xi, 2)
    with pytest.raises(IndexError):
        boolean_sat(Atom(GEQ, 0), xi, -1)


def test_batch_matches_single():
    rng = np.random.default_rng(0)
    values = rng.normal(size=(5, 11))
    f = Or(Eventually(Atom(GEQ, 0.5), TimeWindow(1, 3)), Globally(Atom(LEQ, 1)))
    batch = robustness_batch(f, values, 1.0)
    for row, x in zip(batch, values):
        np.testing.assert_array_equal(row, robustness_signal(f, traj(x)))
    with pytest.raises(ValueError):
        robustness_batch(f, values[0], 1.0)


@given(formulas(allow_true=True), signals(), st.sampled_from([1.0, 0.5]))
def test_robustness_equals_oracle(f, x, h):
    np.testing.assert_array_equal(robustness_signal(f, traj(x, h)), oracle_robustness(f, x, h))


@given(formulas(allow_true=True), signals(), st.sampled_from([1.0, 0.5]))
def test_satisfaction_equals_oracle(f, x, h):
    np.testing.assert_array_equal(boolean_signal(f, traj(x, h)), oracle_satisfaction(f, x, h))


@given(formulas(allow_true=True), signals())
def test_soundness(f, x):
    xi = traj(x)
    rho = robustness_signal(f, xi)
    sat = boolean_signal(f, xi)
    assert np.all(sat[rho > 0])
    assert not np.any(sat[rho < 0])


@given(formulas(), signals())
def test_negation_antisymmetry(f, x):
    xi = traj(x)
    np.testing.assert_array_equal(robustness_signal(Not(f), xi), -robustness_signal(f, xi))


@given(formulas(max_leaves=4), formulas(max_leaves=4), signals())
def test_de_morgan(a, b, x):
    xi = traj(x)
    np.testing.assert_array_equal(
        robustness_signal(Not(And(a, b)), xi), robustness_signal(Or(Not(a), Not(b)), xi)
    )


@given(formulas(windowed=False), signals())
def test_boundedness(f, x):
    # unwindowed temporal operators never see an empty window, so values stay finite
    rho = robustness_signal(f, traj(x))
    assert np.all(np.abs(rho) <= np.max(np.abs(x)) + max_abs_threshold(f))


@given(formulas(max_leaves=4), signals(min_len=2), windows(), st.integers(0, 3), st.integers(0, 3))
def test_window_monotonicity(f, x, w, shrink_lo, grow_hi):
    xi = traj(x)
    big = TimeWindow(max(0.0, w.lo - shrink_lo), w.hi + grow_hi)
    assert np.all(robustness_signal(Eventually(f, big), xi) >= robustness_signal(Eventually(f, w), xi))
    assert np.all(robustness_signal(Globally(f, big), xi) <= robustness_signal(Globally(f, w), xi))


@given(formulas(max_leaves=4), signals())
def test_until_with_true_left_is_eventually(f, x):
    xi = traj(x)
    np.testing.assert_array_equal(robustness_signal(Until(TrueF(), f), xi), robustness_signal(Eventually(f), xi))
