"""Deterministic seed derivation for independent random streams.

Every stochastic routine in this package draws from a stream identified by
(master seed, purpose string, index).  The purpose string is hashed with
SHA-256 so that streams for different purposes are statistically independent
and stable across runs, platforms, and Python hash randomization.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "derive_rng"]

_SEED_MOD = 2**63


def derive_seed(master: int, purpose: str, index: int = 0) -> int:
    """Return a stable sub-seed for (master, purpose, index)."""
    if not isinstance(master, (int, np.integer)):
        raise ValueError(f"master seed must be an integer, got {type(master).__name__}")
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    tag = int.from_bytes(digest[:8], "big")
    seq = np.random.SeedSequence([int(master) % _SEED_MOD, tag % _SEED_MOD, int(index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Generator seeded by derive_seed(master, purpose, index)."""
    return np.random.default_rng(derive_seed(master, purpose, index))
