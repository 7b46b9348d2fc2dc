"""Deterministic derivation of independent random sub-streams.

Every stochastic component draws from a generator keyed by the master seed
plus a fixed integer path, so results never depend on evaluation order,
worker count, or scheduling. Paths are namespaced by the constants below.
"""

from __future__ import annotations

import numpy as np

STREAM_PROPOSAL = 2
STREAM_SIMULATION = 3
STREAM_OBSERVED = 10
STREAM_TRUE_PREDICTIVE = 11
STREAM_POSTERIOR_PREDICTIVE = 12


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for ``path`` under ``seed``, independent of creation order."""
    key = tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def normalize_rng(rng) -> np.random.Generator:
    """Accept a Generator, SeedSequence, or integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
