"""Exception types shared across the toolkit."""


class CoboError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CoboError):
    """Invalid search-domain specification."""


class DuplicatePoint(CoboError):
    """Two training inputs coincide; a noise-free kernel matrix would be singular."""


class NonPositiveDefinite(CoboError):
    """Cholesky factorization failed even after jitter escalation."""


class DegeneratePoint(CoboError):
    """Posterior variance below the stability floor; spatial derivatives of the
    Cholesky factor are ill-conditioned there."""


class OuterFunctionError(CoboError):
    """The outer function returned a non-finite value."""


class AllDegenerate(CoboError):
    """Every ascent restart collapsed onto already-evaluated points."""


class MissingOptimum(CoboError):
    """Regret requested for a problem without a recorded true optimum."""


class UnknownProblem(CoboError):
    """Problem name not present in the catalog."""


class UnknownMethod(CoboError):
    """Method name not recognized."""


class UsageError(CoboError):
    """Invalid command-line invocation."""
