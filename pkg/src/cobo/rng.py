"""Deterministic random-stream derivation.

Every stochastic component draws from a named substream derived from a root
seed plus string/int keys, so results are reproducible and independent of
scheduling: two runs with the same keys get bit-identical draws, and sibling
streams are statistically independent.
"""

import hashlib

import numpy as np


def stable_key(*parts) -> int:
    """Hash a tuple of strings/ints into a stable 64-bit stream key."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(*parts) -> np.random.Generator:
    """Return a Generator keyed by the given parts (order-sensitive)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(stable_key(*parts))))


def standard_normal_matrix(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Draw a (count, dim) matrix of standard normals from the stream."""
    return rng.standard_normal((count, dim))


def antithetic_normal_matrix(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Draw standard normals in antithetic pairs (exactly zero sample mean).

    count must be even; the second half is the negation of the first.
    """
    if count % 2 != 0:
        raise ValueError("antithetic draws require an even count")
    half = rng.standard_normal((count // 2, dim))
    return np.concatenate([half, -half], axis=0)
