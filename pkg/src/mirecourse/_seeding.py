"""Stateless seed derivation: every random stream is keyed by (seed, *keys)."""

import numpy as np


def derive(seed, *keys) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *keys))
