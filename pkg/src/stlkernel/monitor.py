"""Quantitative (robustness) and Boolean STL monitors on uniform grids.

Temporal operators quantify over grid points only. A window ``[lo, hi]`` at
grid index ``i`` covers the indices ``j >= i`` with ``lo <= (j - i) * h <= hi``;
an unwindowed operator covers the whole remaining trace ``[i, end]``.
Windows that fall past the end of the trace are empty: ``F`` and ``U`` then
give ``-inf`` and ``G`` gives ``+inf``.

Every evaluator works on a batch of equally gridded signals stored as an
array of shape ``(n_trajectories, n_points)``; only ``min``, ``max`` and
negation are applied after the atoms, so results do not depend on the order
of evaluation.
"""

from __future__ import annotations

import math

import numpy as np

from .formula import (
    GEQ,
    And,
    Atom,
    Eventually,
    Formula,
    Globally,
    Not,
    Or,
    TimeWindow,
    TrueF,
    Until,
)

__all__ = [
    "window_offsets",
    "robustness_batch",
    "satisfaction_batch",
    "robustness_signal",
    "robustness",
    "boolean_signal",
    "boolean_sat",
]

# relative slack when mapping window bounds in seconds onto grid offsets
_GRID_TOL = 1e-9


def window_offsets(window: TimeWindow | None, h: float, n_points: int) -> tuple[int, int]:
    """Inclusive range of grid offsets covered by ``window``, clipped to the trace.

    Returns ``(lo, hi)`` with ``hi < lo`` when the window is empty on this grid.
    """
    last = n_points - 1
    if window is None:
        return 0, last
    lo = max(0, math.ceil(window.lo / h - _GRID_TOL))
    hi = min(last, math.floor(window.hi / h + _GRID_TOL))
    return lo, hi


def _values(xi) -> tuple[np.ndarray, float]:
    return np.asarray(xi.values, dtype=float), float(xi.h)


def robustness_batch(f: Formula, values: np.ndarray, h: float) -> np.ndarray:
    """Robustness of ``f`` at every grid index of every row of ``values``."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("values must have shape (n_trajectories, n_points)")
    return _rob(f, values, h)


def _rob(f: Formula, x: np.ndarray, h: float) -> np.ndarray:
    if isinstance(f, Atom):
        return x - f.threshold if f.op == GEQ else f.threshold - x
    if isinstance(f, TrueF):
        return np.full(x.shape, np.inf)
    if isinstance(f, Not):
        return -_rob(f.arg, x, h)
    if isinstance(f, And):
        return np.minimum(_rob(f.left, x, h), _rob(f.right, x, h))
    if isinstance(f, Or):
        return np.maximum(_rob(f.left, x, h), _rob(f.right, x, h))
    if isinstance(f, (Eventually, Globally)):
        r = _rob(f.arg, x, h)
        n = r.shape[1]
        lo, hi = window_offsets(f.window, h, n)
        reduce_ = np.maximum if isinstance(f, Eventually) else np.minimum
        out = np.full(r.shape, -np.inf if isinstance(f, Eventually) else np.inf)
        for d in range(lo, hi + 1):
            reduce_(out[:, : n - d], r[:, d:], out=out[:, : n - d])
        return out
    if isinstance(f, Until):
        r1 = _rob(f.left, x, h)
        r2 = _rob(f.right, x, h)
        n = r1.shape[1]
        lo, hi = window_offsets(f.window, h, n)
        out = np.full(r1.shape, -np.inf)
        # prefix[:, i] = min of r1 over [i, i + d]
        prefix = r1.copy()
        for d in range(0, hi + 1):
            if d > 0:
                np.minimum(prefix[:, : n - d], r1[:, d:], out=prefix[:, : n - d])
            if d >= lo:
                cand = np.minimum(r2[:, d:], prefix[:, : n - d])
                np.maximum(out[:, : n - d], cand, out=out[:, : n - d])
        return out
    raise TypeError(f"not a formula: {f!r}")


def satisfaction_batch(f: Formula, values: np.ndarray, h: float) -> np.ndarray:
    """Boolean satisfaction of ``f`` at every grid index of every row."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("values must have shape (n_trajectories, n_points)")
    return _sat(f, values, h)


def _sat(f: Formula, x: np.ndarray, h: float) -> np.ndarray:
    if isinstance(f, Atom):
        return x >= f.threshold if f.op == GEQ else x <= f.threshold
    if isinstance(f, TrueF):
        return np.ones(x.shape, dtype=bool)
    if isinstance(f, Not):
        return ~_sat(f.arg, x, h)
    if isinstance(f, And):
        return _sat(f.left, x, h) & _sat(f.right, x, h)
    if isinstance(f, Or):
        return _sat(f.left, x, h) | _sat(f.right, x, h)
    if isinstance(f, (Eventually, Globally)):
        s = _sat(f.arg, x, h)
        n = s.shape[1]
        lo, hi = window_offsets(f.window, h, n)
        if isinstance(f, Eventually):
            out = np.zeros(s.shape, dtype=bool)
            for d in range(lo, hi + 1):
                out[:, : n - d] |= s[:, d:]
        else:
            out = np.ones(s.shape, dtype=bool)
            for d in range(lo, hi + 1):
                out[:, : n - d] &= s[:, d:]
        return out
    if isinstance(f, Until):
        s1 = _sat(f.left, x, h)
        s2 = _sat(f.right, x, h)
        n = s1.shape[1]
        lo, hi = window_offsets(f.window, h, n)
        out = np.zeros(s1.shape, dtype=bool)
        prefix = s1.copy()
        for d in range(0, hi + 1):
            if d > 0:
                prefix[:, : n - d] &= s1[:, d:]
            if d >= lo:
                out[:, : n - d] |= s2[:, d:] & prefix[:, : n - d]
        return out
    raise TypeError(f"not a formula: {f!r}")


def robustness_signal(f: Formula, xi) -> np.ndarray:
    """Robustness of ``f`` on trajectory ``xi`` at each of its grid points."""
    values, h = _values(xi)
    return _rob(f, values[None, :], h)[0]


def boolean_signal(f: Formula, xi) -> np.ndarray:
    values, h = _values(xi)
    return _sat(f, values[None, :], h)[0]


def _check_index(xi, t_index: int) -> None:
    n = len(xi.values)
    if not 0 <= t_index < n:
        raise IndexError(f"t_index {t_index} out of range for trajectory with {n} points")


def robustness(f: Formula, xi, t_index: int = 0) -> float:
    _check_index(xi, t_index)
    return float(robustness_signal(f, xi)[t_index])


def boolean_sat(f: Formula, xi, t_index: int = 0) -> bool:
    _check_index(xi, t_index)
    return bool(boolean_signal(f, xi)[t_index])
