# /utils/seeds.py
# Seed derivation. Every random draw in an experiment is keyed by (master seed, purpose, index)
# so that adding a trial or a regime never shifts the draws of another one.
import numpy as np


def derive_seed(master_seed: int, *keys: int) -> int:
    seq = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, *keys])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def rng_for(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))


# purpose keys
TARGETS = 1
SPLIT = 2
CANDIDATES = 3
RANDOMIZED = 4
