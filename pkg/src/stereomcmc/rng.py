"""Seeded Philox streams, one independent substream per (seed, chain)."""

import numpy as np

GENERATOR = "Philox4x64-10"


def make_rng(seed: int, chain: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain)])))
