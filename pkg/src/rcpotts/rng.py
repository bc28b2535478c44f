"""Seeded, splittable random streams.

Every stochastic routine in the package takes either an integer seed or a
``numpy.random.Generator``.  Named sub-streams are derived from a master seed
so that, e.g., the graph and the dynamics of one experiment are independently
reproducible.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, *names: str) -> np.random.Generator:
    """Generator for the sub-stream ``names`` of master ``seed``."""
    key = tuple(_name_key(nm) for nm in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed or Generator is required")
    return np.random.default_rng(int(seed))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit integer seed from ``rng`` (for handing to sub-routines)."""
    return int(rng.integers(0, 2**63 - 1))
