"""Random STL formulae grown bottom-up from a pool of atoms.

Starting from ``n`` atoms ``x >= k_i``, operators are applied to members of
the pool until a single formula remains; that formula is then wrapped in one
more unary operator with probability ``wrap_prob``. Unary operators do not
shrink the pool, so at most ``max_unary_run`` of them are applied in a row
before a binary operator is forced; this makes termination certain rather
than merely almost sure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .formula import GEQ, And, Atom, Eventually, Formula, Globally, Not, Or, Until
from .seeding import item_rng

__all__ = ["FormulaGenConfig", "sample_formula", "sample_corpus"]

_LOOP_OPS = ("or", "and", "until", "eventually", "globally")
_BINARY = ("or", "and", "until")
_WRAP_OPS = ("not", "eventually", "globally")


@dataclass(frozen=True)
class FormulaGenConfig:
    max_atoms: int = 6
    threshold_lo: float = -7.0
    threshold_hi: float = 7.0
    seed: int = 0
    not_prob: float = 0.5
    wrap_prob: float = 0.5
    max_unary_run: int = 3

    def __post_init__(self):
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be at least 1")
        if not self.threshold_lo < self.threshold_hi:
            raise ValueError("threshold_lo must be below threshold_hi")
        if not (0 <= self.not_prob <= 1 and 0 <= self.wrap_prob <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.max_unary_run < 0:
            raise ValueError("max_unary_run must be non-negative")


def _unary(op: str, f: Formula) -> Formula:
    if op == "not":
        return Not(f)
    if op == "eventually":
        return Eventually(f)
    return Globally(f)


def _binary(op: str, a: Formula, b: Formula) -> Formula:
    if op == "or":
        return Or(a, b)
    if op == "and":
        return And(a, b)
    return Until(a, b)


def sample_formula(cfg: FormulaGenConfig, rng: Optional[np.random.Generator] = None) -> Formula:
    if rng is None:
        rng = item_rng(cfg.seed, 0)
    n = int(rng.integers(1, cfg.max_atoms + 1))
    pool: list[Formula] = [
        Atom(GEQ, float(rng.uniform(cfg.threshold_lo, cfg.threshold_hi))) for _ in range(n)
    ]
    unary_run = 0
    while len(pool) > 1:
        if unary_run >= cfg.max_unary_run:
            op = _BINARY[int(rng.integers(len(_BINARY)))]
        elif rng.random() < cfg.not_prob:
            op = "not"
        else:
            op = _LOOP_OPS[int(rng.integers(len(_LOOP_OPS)))]
        if op in _BINARY:
            i, j = (int(v) for v in rng.choice(len(pool), size=2, replace=False))
            phi = _binary(op, pool[i], pool[j])
            for k in sorted((i, j), reverse=True):
                del pool[k]
            unary_run = 0
        else:
            i = int(rng.integers(len(pool)))
            phi = _unary(op, pool.pop(i))
            unary_run += 1
        pool.append(phi)
    out = pool[0]
    if rng.random() < cfg.wrap_prob:
        out = _unary(_WRAP_OPS[int(rng.integers(len(_WRAP_OPS)))], out)
    return out


def sample_corpus(cfg: FormulaGenConfig, count: int) -> list[Formula]:
    """``count`` formulae; formula ``i`` uses the ``i``-th stream of ``cfg.seed``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [sample_formula(cfg, item_rng(cfg.seed, i)) for i in range(count)]
