"""Seed plumbing.

All randomness in the package flows through numpy's PCG64 generator seeded
from a ``SeedSequence``.  PCG64 has a published, stable bit stream, so runs
are reproducible across platforms and numpy versions.  Parallel trials get
independent streams by spawning with ``spawn_key=(trial_index, ...)`` from
the master seed -- never by arithmetic on the seed itself.
"""
from __future__ import annotations

import numpy as np


def seed_sequence(master: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(path))


def make_generator(master: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (master seed, index path)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *path)))


def derive_seed(master: int, *path: int) -> int:
    """A plain integer seed derived from (master, path), for sub-components."""
    return int(seed_sequence(master, *path).generate_state(1, np.uint64)[0])
