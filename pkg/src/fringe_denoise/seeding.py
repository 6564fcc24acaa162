"""Deterministic RNG derivation.

Every stream in the toolkit is derived from the master seed plus a small
namespaced key, so any artifact can be regenerated in isolation (e.g. one
corpus image) without replaying the streams that preceded it.

Namespaces: 0 = network init, 1 = corpus images, 2 = corpus-level draws,
3 = epoch shuffles, 4 = holdout split, 5 = white-noise augmentation.
"""

from __future__ import annotations

import numpy as np


def derive_rng(master_seed: int, namespace: int, index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(namespace, index))
    return np.random.default_rng(seq)
