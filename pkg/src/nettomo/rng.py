"""Deterministic seed derivation for Monte Carlo work.

All randomness in the package flows through numpy's PCG64 generator.
Independent streams are derived from a master seed with counter-based
spawn keys: stream ``(master, path)`` is a pure function of its arguments,
so adding more streams (e.g. more trials) never perturbs existing ones.
"""

from __future__ import annotations

import numpy as np


def split_seed(master_seed: int, *path: int) -> int:
    """Derive the child seed at position ``path`` under ``master_seed``.

    Uses ``numpy.random.SeedSequence`` with ``path`` as the spawn key.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=path)
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for ``seed``, the single RNG used across the package."""
    return np.random.default_rng(seed)
