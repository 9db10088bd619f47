"""Seed splitting so parallel tasks draw from independent, reproducible streams."""

import numpy as np

SPLIT_MULTIPLIER = 1_000_003


def split_seed(master_seed: int, index: int) -> int:
    """Seed for task ``index`` under ``master_seed``: ``master * 1000003 + index``."""
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and task indices must be non-negative")
    return int(master_seed) * SPLIT_MULTIPLIER + int(index)


def task_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for a (possibly nested) task index path."""
    seed = int(master_seed)
    for index in indices:
        seed = split_seed(seed, index)
    return np.random.default_rng(seed)
