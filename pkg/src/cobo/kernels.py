"""ARD squared-exponential kernel primitives.

All functions are shape-polymorphic over a batch of query points and vectorize
across outputs where the caller supplies per-output lengthscales.
"""

import logging

import numpy as np

from .errors import NonPositiveDefinite

logger = logging.getLogger(__name__)

# Relative jitter ladder: start, escalation factor, cap (fractions of signal variance).
JITTER_START = 1e-10
JITTER_FACTOR = 10.0
JITTER_CAP = 1e-4


def pairwise_sqdiff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared per-dimension differences, shape (len(a), len(b), d)."""
    return (a[:, None, :] - b[None, :, :]) ** 2


def ard_se_matrix(sqdiff: np.ndarray, signal_variance: float, lengthscales: np.ndarray) -> np.ndarray:
    """Kernel matrix from precomputed squared differences (n, q, d) -> (n, q)."""
    z = sqdiff @ (0.5 / lengthscales**2)
    return signal_variance * np.exp(-z)


def ard_se_cross(x: np.ndarray, train: np.ndarray, signal_variance: float,
                 lengthscales: np.ndarray) -> np.ndarray:
    """Cross-kernel k(x_q, t_i), shape (q, n)."""
    return ard_se_matrix(pairwise_sqdiff(x, train), signal_variance, lengthscales)


def chol_with_jitter(corr: np.ndarray, signal_variance: float, start_rel: float = JITTER_START):
    """Cholesky of signal_variance * (corr + jitter*I) with jitter escalation.

    corr is the unit-diagonal correlation matrix; start_rel is the first rung
    of the relative-jitter ladder (0 tries the bare matrix). Returns
    (lower_factor, relative_jitter_used). Raises NonPositiveDefinite when the
    cap is reached.
    """
    n = corr.shape[0]
    rel = start_rel
    while rel <= JITTER_CAP * (1 + 1e-12):
        try:
            factor = np.linalg.cholesky(signal_variance * (corr + rel * np.eye(n)))
        except np.linalg.LinAlgError:
            higher = JITTER_START if rel < JITTER_START else rel * JITTER_FACTOR
            if rel > start_rel:
                logger.warning("jitter escalation: %.1e failed, trying %.1e", rel, higher)
            rel = higher
            continue
        if not np.all(np.isfinite(factor)):
            raise NonPositiveDefinite("non-finite Cholesky factor; check hyperparameters")
        return factor, rel
    raise NonPositiveDefinite(
        f"kernel matrix not positive definite after jitter escalation to {JITTER_CAP:g} x signal variance"
    )
