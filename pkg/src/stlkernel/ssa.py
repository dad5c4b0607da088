"""Gillespie direct-method simulation of mass-action reaction networks.

The three built-in networks (immigration, isomerization, polymerase) are
minimal placeholders with unit rates; every rate and initial count can be
overridden with a JSON network file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .seeding import item_rng
from .trajectories import Trajectory, znormalize

__all__ = [
    "Reaction",
    "ReactionNetwork",
    "SSAConfig",
    "gillespie_simulate",
    "sample_process",
    "sample_process_values",
    "resolve_model",
    "builtin_model",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "BUILTIN_MODELS",
]

# uniforms per refill of the event loop; even sizes so no draw is split across refills
_FIRST_CHUNK = 64
_MAX_CHUNK = 1 << 16


@dataclass(frozen=True)
class Reaction:
    change: tuple[int, ...]
    rate: float
    reactants: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "change", tuple(int(c) for c in self.change))
        object.__setattr__(self, "reactants", tuple(int(r) for r in self.reactants))
        if not self.rate > 0:
            raise ValueError(f"rate constants must be positive, got {self.rate}")
        if len(self.reactants) > 2:
            raise ValueError("only mass-action orders 0, 1 and 2 are supported")


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    initial: tuple[int, ...]
    reactions: tuple[Reaction, ...]
    observed: str

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "initial", tuple(int(v) for v in self.initial))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        n = len(self.species)
        if len(self.initial) != n:
            raise ValueError("initial counts must match the species list")
        if any(v < 0 for v in self.initial):
            raise ValueError("initial counts must be non-negative")
        for r in self.reactions:
            if len(r.change) != n:
                raise ValueError("change vectors must have one entry per species")
            if any(not 0 <= i < n for i in r.reactants):
                raise ValueError("reactant index out of range")
        if self.observed not in self.species:
            raise ValueError(f"observed species {self.observed!r} is not in the network")

    @property
    def observed_index(self) -> int:
        return self.species.index(self.observed)

    def arrays(self):
        n_r = len(self.reactions)
        changes = np.zeros((n_r, len(self.species)), dtype=np.int64)
        rates = np.zeros(n_r)
        reactants = np.full((n_r, 2), -1, dtype=np.int64)
        for k, r in enumerate(self.reactions):
            changes[k] = r.change
            rates[k] = r.rate
            reactants[k, : len(r.reactants)] = r.reactants
        return changes, rates, reactants


@dataclass(frozen=True)
class SSAConfig:
    """Output grid ``t0 + i * h`` for ``i = 0..n_steps``; simulation stops at ``t_end``."""

    t0: float = 0.0
    h: float = 1.0
    n_steps: int = 20
    t_end: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.t_end is not None and self.t_end < self.grid_end - 1e-12:
            raise ValueError("t_end must cover the output grid")

    @property
    def grid_end(self) -> float:
        return self.t0 + self.n_steps * self.h

    @property
    def horizon(self) -> float:
        return self.grid_end if self.t_end is None else self.t_end

    def grid(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)


@numba.njit(cache=True)
def _advance(state, t, t_end, changes, rates, reactants, uniforms, grid, out, pos, obs):
    """Run events until uniforms run out or the path ends.

    Returns ``(t, pos, status)``: status 0 means more uniforms are needed,
    1 means the path is complete, 2 means a propensity overflowed.
    """
    n_r = rates.shape[0]
    props = np.empty(n_r)
    k = 0
    n_u = uniforms.shape[0]
    while True:
        total = 0.0
        for r in range(n_r):
            a = rates[r]
            i = reactants[r, 0]
            j = reactants[r, 1]
            if i >= 0:
                if j < 0:
                    a *= state[i]
                elif i == j:
                    a *= state[i] * (state[i] - 1) * 0.5
                else:
                    a *= state[i] * state[j]
            props[r] = a
            total += a
        if not np.isfinite(total):
            return t, pos, 2
        if total <= 0.0:
            t_next = np.inf
        else:
            if k + 2 > n_u:
                return t, pos, 0
            t_next = t - np.log(uniforms[k]) / total
        if t_next > t_end:
            while pos < grid.shape[0]:
                out[pos] = state[obs]
                pos += 1
            return t_end, pos, 1
        while pos < grid.shape[0] and grid[pos] < t_next:
            out[pos] = state[obs]
            pos += 1
        target = uniforms[k + 1] * total
        k += 2
        acc = 0.0
        chosen = n_r - 1
        for r in range(n_r):
            acc += props[r]
            if target < acc:
                chosen = r
                break
        for s in range(state.shape[0]):
            state[s] += changes[chosen, s]
        t = t_next


def _simulate(net: ReactionNetwork, cfg: SSAConfig, rng: np.random.Generator, arrays=None) -> np.ndarray:
    changes, rates, reactants = arrays if arrays is not None else net.arrays()
    state = np.array(net.initial, dtype=np.int64)
    grid = cfg.grid()
    out = np.empty(grid.size)
    t, pos = float(cfg.t0), 0
    chunk = _FIRST_CHUNK
    while True:
        # 1 - U lies in (0, 1], safe for the log of the waiting time
        uniforms = 1.0 - rng.random(chunk)
        chunk = min(2 * chunk, _MAX_CHUNK)
        t, pos, status = _advance(
            state, t, cfg.horizon, changes, rates, reactants, uniforms, grid, out, pos, net.observed_index
        )
        if status == 1:
            return out
        if status == 2:
            raise OverflowError("reaction propensity overflowed")


def gillespie_simulate(net: ReactionNetwork, cfg: SSAConfig, rng: Optional[np.random.Generator] = None) -> Trajectory:
    """One exact sample path of the observed species on the output grid.

    The grid value at time ``t`` is the state after the last event at or
    before ``t``. A path whose total propensity drops to zero stays constant.
    """
    if rng is None:
        rng = item_rng(cfg.seed, 0)
    return Trajectory(cfg.t0, cfg.h, _simulate(net, cfg, rng))


def sample_process_values(net: ReactionNetwork, cfg: SSAConfig, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be at least 1")
    arrays = net.arrays()
    out = np.empty((count, cfg.n_steps + 1))
    for i in range(count):
        out[i] = _simulate(net, cfg, item_rng(cfg.seed, i), arrays)
    return out


def sample_process(net: ReactionNetwork, cfg: SSAConfig, count: int, normalize: bool = True) -> list[Trajectory]:
    """``count`` independent paths on the shared grid, z-normalized as a batch if asked."""
    values = sample_process_values(net, cfg, count)
    trajs = [Trajectory(cfg.t0, cfg.h, row) for row in values]
    return znormalize(trajs) if normalize else trajs


# ------------------------------------------------------------ built-ins


def _immigration() -> ReactionNetwork:
    return ReactionNetwork(("X",), (0,), (Reaction((1,), 1.0),), "X")


def _isomerization() -> ReactionNetwork:
    return ReactionNetwork(
        ("A", "B"),
        (100, 0),
        (Reaction((-1, 1), 1.0, (0,)), Reaction((1, -1), 1.0, (1,))),
        "B",
    )


def _polymerase() -> ReactionNetwork:
    # template T is a catalyst: T -> T + P
    return ReactionNetwork(("T", "P"), (10, 0), (Reaction((0, 1), 1.0, (0,)),), "P")


BUILTIN_MODELS = {
    "immigration": _immigration,
    "isomerization": _isomerization,
    "polymerase": _polymerase,
}


def builtin_model(name: str) -> ReactionNetwork:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None


def network_from_dict(d: dict) -> ReactionNetwork:
    species = list(d["species"])
    reactions = []
    for r in d["reactions"]:
        reactants = [species.index(x) if isinstance(x, str) else int(x) for x in r.get("reactants", [])]
        reactions.append(Reaction(tuple(r["change"]), float(r["rate"]), tuple(reactants)))
    return ReactionNetwork(tuple(species), tuple(d["initial"]), tuple(reactions), d["observed"])


def network_to_dict(net: ReactionNetwork) -> dict:
    return {
        "species": list(net.species),
        "initial": list(net.initial),
        "reactions": [
            {"change": list(r.change), "rate": r.rate, "reactants": list(r.reactants)}
            for r in net.reactions
        ],
        "observed": net.observed,
    }


def load_network(path) -> ReactionNetwork:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def resolve_model(spec: str) -> ReactionNetwork:
    """``immigration`` / ``isomerization`` / ``polymerase`` or ``file:<path>``."""
    if spec.startswith("file:"):
        return load_network(spec[len("file:"):])
    return builtin_model(spec)
