"""Uniformly gridded scalar trajectories and the base measure mu0.

mu0 draws piecewise-linear signals whose total variation is the square of a
Gaussian and whose increments change sign rarely, so simple signals are
favoured over complex ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seeding import item_rng

__all__ = [
    "Trajectory",
    "Mu0Config",
    "sample_mu0",
    "sample_mu0_values",
    "total_variation",
    "monotonicity_changes",
    "znormalize",
    "resample",
    "stack_values",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_batch_csv",
    "read_batch_csv",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Values ``values[i]`` observed at times ``t0 + i * h``."""

    t0: float
    h: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("trajectory values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory values must be finite")
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.h * (self.values.size - 1)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.h == other.h
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class Mu0Config:
    a: float = 0.0
    b: float = 20.0
    h: float = 1.0
    sigma_start: float = 1.0
    sigma_tv: float = 1.0
    q: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("mu0 config needs a < b")
        if not self.h > 0:
            raise ValueError("mu0 config needs h > 0")
        steps = (self.b - self.a) / self.h
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("(b - a) / h must be an integer")
        if not (self.sigma_start > 0 and self.sigma_tv > 0):
            raise ValueError("sigma_start and sigma_tv must be positive")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must be a probability")

    @property
    def n_steps(self) -> int:
        return int(round((self.b - self.a) / self.h))


def _draw_mu0(rng: np.random.Generator, cfg: Mu0Config) -> tuple[np.ndarray, float]:
    n = cfg.n_steps
    start = rng.normal(0.0, cfg.sigma_start)
    tv = rng.normal(0.0, cfg.sigma_tv) ** 2
    cuts = np.sort(rng.uniform(0.0, 1.0, n - 1)) * tv
    gaps = np.diff(np.concatenate(([0.0], cuts, [tv])))
    s0 = 1.0 if rng.random() < 0.5 else -1.0
    # sign of increment i is s0 times the product of the first i+1 flips
    flips = np.where(rng.random(n) < cfg.q, -1.0, 1.0)
    signs = s0 * np.cumprod(flips)
    values = np.empty(n + 1)
    values[0] = start
    values[1:] = start + np.cumsum(signs * gaps)
    return values, tv


def sample_mu0_values(cfg: Mu0Config, count: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` mu0 paths as a ``(count, N + 1)`` array plus their total variations.

    Path ``i`` uses the ``start + i``-th stream of ``cfg.seed``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    out = np.empty((count, cfg.n_steps + 1))
    tvs = np.empty(count)
    for i in range(count):
        out[i], tvs[i] = _draw_mu0(item_rng(cfg.seed, start + i), cfg)
    return out, tvs


def sample_mu0(cfg: Mu0Config, count: int, return_tv: bool = False):
    values, tvs = sample_mu0_values(cfg, count)
    trajs = [Trajectory(cfg.a, cfg.h, row) for row in values]
    return (trajs, tvs) if return_tv else trajs


def total_variation(xi: Trajectory) -> float:
    return float(np.abs(np.diff(xi.values)).sum())


def monotonicity_changes(xi: Trajectory) -> int:
    signs = np.sign(np.diff(xi.values))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def stack_values(trajs: Sequence[Trajectory]) -> np.ndarray:
    """Stack equally gridded trajectories into an array of shape ``(M, T)``."""
    first = trajs[0]
    for xi in trajs[1:]:
        if xi.t0 != first.t0 or xi.h != first.h or len(xi) != len(first):
            raise ValueError("trajectories do not share one grid")
    return np.vstack([xi.values for xi in trajs])


def znormalize(trajs: Sequence[Trajectory]) -> list[Trajectory]:
    """Shift and scale by the mean and standard deviation pooled over all points."""
    if not trajs:
        raise ValueError("cannot normalize an empty set of trajectories")
    pooled = np.concatenate([xi.values for xi in trajs])
    mean = pooled.mean()
    std = pooled.std()
    if not std > 0:
        raise ValueError("pooled variance is zero; cannot z-normalize")
    return [Trajectory(xi.t0, xi.h, (xi.values - mean) / std) for xi in trajs]


def resample(xi: Trajectory, h_new: float) -> Trajectory:
    """Linear interpolation of ``xi`` onto the grid ``t0 + j * h_new`` within its span."""
    if not h_new > 0:
        raise ValueError("h_new must be positive")
    span = xi.t_end - xi.t0
    n = int(math.floor(span / h_new + 1e-9)) + 1
    t_new = xi.t0 + h_new * np.arange(n)
    values = np.interp(t_new, xi.times, xi.values)
    return Trajectory(xi.t0, h_new, values)


# ---------------------------------------------------------------------- I/O


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(path, xi: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "x"])
        for t, v in zip(xi.times, xi.values):
            w.writerow([_fmt(t), _fmt(v)])


def _grid_from_times(times: np.ndarray) -> tuple[float, float]:
    if times.size < 2:
        return float(times[0]), 1.0
    steps = np.diff(times)
    h = float(steps.mean())
    if not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
        raise ValueError("trajectory CSV is not on a uniform grid")
    return float(times[0]), h


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["time"]) for r in rows])
    t0, h = _grid_from_times(times)
    return Trajectory(t0, h, [float(r["x"]) for r in rows])


def write_batch_csv(path, trajs: Iterable[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj_id", "time", "x"])
        for k, xi in enumerate(trajs):
            for t, v in zip(xi.times, xi.values):
                w.writerow([k, _fmt(t), _fmt(v)])


def read_batch_csv(path) -> list[Trajectory]:
    groups: dict[int, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            groups.setdefault(int(r["traj_id"]), []).append((float(r["time"]), float(r["x"])))
    out = []
    for key in sorted(groups):
        pts = sorted(groups[key])
        t0, h = _grid_from_times(np.array([p[0] for p in pts]))
        out.append(Trajectory(t0, h, [p[1] for p in pts]))
    return out


def read_trajectory_dir(directory) -> list[Trajectory]:
    files = sorted(Path(directory).glob("*.csv"))
    return [read_trajectory_csv(p) for p in files]
