"""Seed derivation.

All randomness goes through numpy's PCG64 bit generator. Item ``i`` of any
batch draws from ``SeedSequence(seed, spawn_key=(i,))`` so that it does not
depend on how many items are requested; named components of an experiment get
their own seed via :func:`derive_seed`.
"""

from __future__ import annotations

import zlib

import numpy as np


def item_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def derive_seed(master: int, name: str) -> int:
    """A 63-bit seed for component ``name`` derived from ``master``."""
    ss = np.random.SeedSequence(master, spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
