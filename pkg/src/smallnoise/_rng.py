"""Seed-derivation plumbing shared by the samplers and the path engine.

Every random object in the package is drawn from a counter-based stream
keyed by (user seed, role tag, index).  Streams for distinct keys are
independent, and the key depends only on what is being generated, never on
scheduling, so any number of workers can generate disjoint indices in any
order and assemble bitwise-identical results.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "derived_generator",
    "TAG_PATH_ENSEMBLE",
    "TAG_COUPLED_PAIR",
    "TAG_FELLER_ENDPOINT",
    "TAG_LIMIT_SAMPLE",
    "TAG_BOOTSTRAP",
]

# Role tags keep streams for different purposes disjoint under one user seed.
TAG_PATH_ENSEMBLE = 0
TAG_COUPLED_PAIR = 1
TAG_FELLER_ENDPOINT = 2
TAG_LIMIT_SAMPLE = 3
TAG_BOOTSTRAP = 4


def derived_generator(seed: int, tag: int, index: int) -> np.random.Generator:
    """Independent generator for stream (seed, tag, index)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if index < 0:
        raise ValueError(f"stream index must be nonnegative, got {index}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.Philox(sequence))
