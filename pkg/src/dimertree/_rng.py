"""Deterministic RNG stream layout.

Every Monte Carlo sample gets its own 64-bit seed derived from the master
seed and the sample index alone, so ensembles are reproducible regardless of
how samples are distributed over workers.
"""

from __future__ import annotations

import numpy as np


def sample_seeds(master_seed, n_samples):
    """n_samples independent uint64 kernel seeds for one experiment."""
    ss = np.random.SeedSequence(master_seed)
    return ss.generate_state(n_samples, dtype=np.uint64)


def seed_for(master_seed, index):
    """Kernel seed of one sample; equals sample_seeds(master_seed, N)[index]."""
    ss = np.random.SeedSequence(master_seed)
    return ss.generate_state(index + 1, dtype=np.uint64)[index]
