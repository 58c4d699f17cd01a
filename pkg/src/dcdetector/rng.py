"""Seeded generators.

One ``SeedSequence`` per run, spawned into independent PCG64 streams for
parameter init, dropout and batch shuffling. Outputs are reproducible
within this build; nothing is promised across numpy major versions.
"""

import numpy as np

PURPOSES = ("init", "dropout", "shuffle")


def split_rngs(seed):
    """Return ``{"init": Generator, "dropout": Generator, "shuffle": Generator}``."""
    children = np.random.SeedSequence(int(seed)).spawn(len(PURPOSES))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(PURPOSES, children)}
