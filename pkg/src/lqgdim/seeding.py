"""Counter-based seed derivation so replicate streams do not depend on scheduling."""
from __future__ import annotations

import numpy as np


def replicate_seed(master_seed: int, *counter: int) -> np.random.SeedSequence:
    """Seed for replicate ``counter`` under ``master_seed``.

    The result depends only on the pair, never on which worker asks or when.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(c) for c in counter))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
