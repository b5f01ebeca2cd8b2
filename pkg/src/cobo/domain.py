"""Axis-aligned box search domains."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BoxDomain:
    """Search region [lower_1, upper_1] x ... x [lower_d, upper_d].

    Parameters
    ----------
    lower, upper : array_like, shape (d,)
        Per-dimension bounds with lower[i] < upper[i].
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise DomainError("lower and upper must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("bounds must be finite")
        if not np.all(lower < upper):
            raise DomainError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def project(self, x: np.ndarray) -> np.ndarray:
        """Componentwise clamp onto the box. Idempotent."""
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def contains(self, x: np.ndarray, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def sample(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        """Uniform draws: a single point (d,) or a batch (count, d)."""
        if count is None:
            return rng.uniform(self.lower, self.upper)
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))
