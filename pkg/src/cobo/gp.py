"""Independent-output multi-output Gaussian-process regression.

Each output of the inner function is modeled by its own constant-mean GP with
an ARD squared-exponential kernel and noise-free observations (an adaptive
numerical jitter keeps factorizations stable). Hyperparameters are estimated
per output, either as a MAP point or as a slice-sampled posterior ensemble.
Posterior queries are vectorized over batches of points and expose analytic
spatial derivatives of the mean and of the covariance Cholesky factor.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.optimize

from . import kernels
from .domain import BoxDomain
from .errors import DegeneratePoint, DuplicatePoint, NonPositiveDefinite
from .rng import substream

logger = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-12
# Outputs with posterior variance below this fraction of the signal variance
# have ill-conditioned Cholesky derivatives (d sqrt(v) blows up as v -> 0).
VARIANCE_FLOOR_REL = 1e-12

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class KernelHyperparams:
    """Per-output kernel hyperparameters for an m-output model over R^d.

    jitter is a relative nugget: the noise-free kernel matrix of output j is
    stabilized with jitter * signal_variance[j] on the diagonal (escalated at
    factorization time when needed, never beyond 1e-4).
    """

    constant_mean: np.ndarray    # (m,)
    signal_variance: np.ndarray  # (m,)
    lengthscales: np.ndarray     # (m, d)
    jitter: float = kernels.JITTER_START

    def __post_init__(self):
        cm = np.atleast_1d(np.asarray(self.constant_mean, dtype=float))
        sv = np.atleast_1d(np.asarray(self.signal_variance, dtype=float))
        ls = np.atleast_2d(np.asarray(self.lengthscales, dtype=float))
        if not (cm.shape[0] == sv.shape[0] == ls.shape[0]):
            raise ValueError("per-output hyperparameter arrays disagree on output count")
        if not np.all(sv > 0):
            raise ValueError("signal_variance must be strictly positive")
        if not np.all(ls > 0):
            raise ValueError("lengthscales must be strictly positive")
        if not (0 <= self.jitter <= kernels.JITTER_CAP):
            raise ValueError(f"jitter must lie in [0, {kernels.JITTER_CAP:g}] (relative to signal variance)")
        object.__setattr__(self, "constant_mean", cm)
        object.__setattr__(self, "signal_variance", sv)
        object.__setattr__(self, "lengthscales", ls)

    @property
    def num_outputs(self) -> int:
        return self.constant_mean.shape[0]

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[1]

    def to_dict(self) -> dict:
        """JSON-serializable form (used by the harness manifest)."""
        return {
            "constant_mean": self.constant_mean.tolist(),
            "signal_variance": self.signal_variance.tolist(),
            "lengthscales": self.lengthscales.tolist(),
            "jitter": self.jitter,
        }


@dataclass(frozen=True)
class HyperPriors:
    """Weakly informative, scale-aware priors in transformed coordinates.

    Per output j the free vector is theta = (c, log s^2, log l_1, ..., log l_d)
    with independent normal priors (i.e. log-normal on s^2 and lengthscales).
    """

    mean_loc: np.ndarray             # (m,)
    mean_scale: np.ndarray           # (m,)
    log_variance_loc: np.ndarray     # (m,)
    log_variance_scale: np.ndarray   # (m,)
    log_lengthscale_loc: np.ndarray  # (m, d)
    log_lengthscale_scale: np.ndarray  # (m, d)

    @classmethod
    def from_data(cls, train_x: np.ndarray, train_h: np.ndarray,
                  domain: BoxDomain | None = None) -> "HyperPriors":
        """Defaults: signal-variance median = data variance, lengthscale median
        = domain width / 4, constant mean centered at the data mean."""
        train_x = np.asarray(train_x, dtype=float)
        train_h = np.asarray(train_h, dtype=float)
        n, d = train_x.shape
        m = train_h.shape[1]
        if domain is not None:
            width = domain.width
        else:
            width = np.ptp(train_x, axis=0)
            width = np.where(width > 0, width, 1.0)
        data_mean = train_h.mean(axis=0)
        data_var = train_h.var(axis=0) if n > 1 else np.ones(m)
        data_var = np.where(data_var > 1e-12, data_var, 1.0)
        return cls(
            mean_loc=data_mean,
            mean_scale=np.maximum(np.sqrt(data_var), 1e-3),
            log_variance_loc=np.log(data_var),
            log_variance_scale=np.full(m, 1.0),
            log_lengthscale_loc=np.tile(np.log(width / 4.0), (m, 1)),
            log_lengthscale_scale=np.full((m, d), 1.0),
        )

    def pack(self, j: int):
        """(loc, scale) vectors for output j's theta."""
        loc = np.concatenate([[self.mean_loc[j]], [self.log_variance_loc[j]], self.log_lengthscale_loc[j]])
        scale = np.concatenate([[self.mean_scale[j]], [self.log_variance_scale[j]], self.log_lengthscale_scale[j]])
        return loc, scale

    def log_density(self, j: int, theta: np.ndarray) -> float:
        loc, scale = self.pack(j)
        z = (theta - loc) / scale
        return float(-0.5 * np.dot(z, z))

    def grad_log_density(self, j: int, theta: np.ndarray) -> np.ndarray:
        loc, scale = self.pack(j)
        return -(theta - loc) / scale**2


@dataclass(frozen=True)
class GaussianPosterior:
    """Posterior of the inner function at one point: mean vector, covariance
    (diagonal under independent outputs), its lower Cholesky factor, and
    optionally their spatial derivatives."""

    mean: np.ndarray               # (m,)
    cov: np.ndarray                # (m, m)
    chol: np.ndarray               # (m, m) lower
    d_mean: np.ndarray | None = None   # (m, d)
    d_chol: np.ndarray | None = None   # (m, m, d)

    @property
    def num_outputs(self) -> int:
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


@dataclass(frozen=True)
class FittedMember:
    """One hyperparameter set with its cached per-output factorizations."""

    hypers: KernelHyperparams
    chol_factors: np.ndarray   # (m, n, n) lower
    weights: np.ndarray        # (n, m), K_j^{-1} (y_j - c_j)
    jitter_used: np.ndarray    # (m,) relative jitter after escalation


@dataclass(frozen=True)
class MultiOutputGPModel:
    """Immutable fitted model; posterior queries are read-only and thread-safe."""

    train_x: np.ndarray              # (n, d)
    train_h: np.ndarray              # (n, m)
    members: tuple                   # tuple[FittedMember, ...]
    priors: HyperPriors | None = None

    @property
    def num_points(self) -> int:
        return self.train_x.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.train_h.shape[1]

    @property
    def dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def ensemble_size(self) -> int:
        return len(self.members)

    @property
    def hyper_ensemble(self) -> list[KernelHyperparams]:
        return [mem.hypers for mem in self.members]


# ---------------------------------------------------------------------------
# Fit modes


@dataclass(frozen=True)
class MapFit:
    """Single member maximizing log marginal likelihood + log prior."""


@dataclass(frozen=True)
class EnsembleFit:
    """`count` members slice-sampled from the hyperparameter posterior."""

    count: int
    seed: int
    burnin: int = 100
    thin: int = 10


@dataclass(frozen=True)
class FixedFit:
    """Use the given hyperparameters verbatim (no estimation)."""

    hypers: KernelHyperparams


# ---------------------------------------------------------------------------
# Internal likelihood machinery (per output, theta = (c, log s2, log ls...))


def _theta_to_params(theta: np.ndarray):
    c = theta[0]
    s2 = float(np.exp(theta[1]))
    ls = np.exp(theta[2:])
    return c, s2, ls


def _correlation(sqdiff: np.ndarray, ls: np.ndarray) -> np.ndarray:
    return np.exp(-(sqdiff @ (0.5 / ls**2)))


def _lml_from_theta(theta: np.ndarray, sqdiff: np.ndarray, y: np.ndarray) -> float:
    """Log marginal likelihood of one output; -inf when numerically infeasible."""
    c, s2, ls = _theta_to_params(theta)
    if not np.isfinite(s2) or s2 <= 0:
        return -np.inf
    corr = _correlation(sqdiff, ls)
    try:
        factor, _ = kernels.chol_with_jitter(corr, s2)
    except NonPositiveDefinite:
        return -np.inf
    r = y - c
    alpha = sla.cho_solve((factor, True), r, check_finite=False)
    n = y.shape[0]
    return float(-0.5 * r @ alpha - np.sum(np.log(np.diag(factor))) - 0.5 * n * _LOG_2PI)


def _lml_and_grad(theta: np.ndarray, sqdiff: np.ndarray, y: np.ndarray):
    """Value and gradient of the log marginal likelihood w.r.t. theta."""
    c, s2, ls = _theta_to_params(theta)
    corr = _correlation(sqdiff, ls)
    factor, _ = kernels.chol_with_jitter(corr, s2)
    r = y - c
    alpha = sla.cho_solve((factor, True), r, check_finite=False)
    n = y.shape[0]
    value = -0.5 * r @ alpha - np.sum(np.log(np.diag(factor))) - 0.5 * n * _LOG_2PI

    kinv = sla.cho_solve((factor, True), np.eye(n), check_finite=False)
    grad = np.empty_like(theta)
    grad[0] = np.sum(alpha)
    # dK/d log s2 = K (jitter scales with s2), so the trace term is exactly n.
    grad[1] = 0.5 * (r @ alpha - n)
    base = s2 * corr
    for k in range(ls.shape[0]):
        dk = base * (sqdiff[:, :, k] / ls[k] ** 2)
        grad[2 + k] = 0.5 * (alpha @ dk @ alpha - np.sum(kinv * dk))
    return float(value), grad


def log_marginal_likelihood(hypers: KernelHyperparams, train_x: np.ndarray,
                            train_h: np.ndarray, output: int) -> float:
    """Gaussian log marginal likelihood of one output's data under `hypers`.

    Raises NonPositiveDefinite when the kernel matrix cannot be factorized
    even after jitter escalation.
    """
    train_x = np.asarray(train_x, dtype=float)
    train_h = np.asarray(train_h, dtype=float)
    sqdiff = kernels.pairwise_sqdiff(train_x, train_x)
    theta = np.concatenate([
        [hypers.constant_mean[output]],
        [np.log(hypers.signal_variance[output])],
        np.log(hypers.lengthscales[output]),
    ])
    value = _lml_from_theta(theta, sqdiff, train_h[:, output])
    if not np.isfinite(value):
        raise NonPositiveDefinite("kernel matrix not positive definite for these hyperparameters")
    return value


# ---------------------------------------------------------------------------
# Hyperparameter estimation


def _map_theta(sqdiff, y, priors: HyperPriors, j: int, restarts: int = 3) -> np.ndarray:
    """MAP estimate of one output's theta via L-BFGS-B with a few restarts."""
    loc, scale = priors.pack(j)
    bounds = list(zip(loc - 10 * scale, loc + 10 * scale))

    def neg_posterior(theta):
        try:
            value, grad = _lml_and_grad(theta, sqdiff, y)
        except NonPositiveDefinite:
            return np.inf, np.zeros_like(theta)
        value += priors.log_density(j, theta)
        grad = grad + priors.grad_log_density(j, theta)
        return -value, -grad

    rng = substream("map-restarts", j)
    starts = [loc] + [loc + scale * rng.standard_normal(loc.shape) for _ in range(restarts - 1)]
    best = None
    for x0 in starts:
        res = scipy.optimize.minimize(neg_posterior, x0, jac=True, method="L-BFGS-B",
                                      bounds=bounds, options={"maxiter": 200})
        if best is None or res.fun < best.fun:
            best = res
    return np.asarray(best.x, dtype=float)


def _slice_sample(logp, theta0: np.ndarray, widths: np.ndarray, steps: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """Hyperrectangle slice sampler (shrinkage only); returns the chain."""
    theta = np.array(theta0, dtype=float)
    current = logp(theta)
    chain = []
    for _ in range(steps):
        level = current - rng.exponential(1.0)
        lower = theta - widths * rng.uniform(size=theta.shape)
        upper = lower + widths
        for _attempt in range(200):
            proposal = lower + rng.uniform(size=theta.shape) * (upper - lower)
            value = logp(proposal)
            if value > level:
                theta = proposal
                current = value
                break
            shrink_low = proposal < theta
            lower[shrink_low] = proposal[shrink_low]
            upper[~shrink_low] = proposal[~shrink_low]
        chain.append(theta.copy())
    return chain


def _ensemble_thetas(sqdiff, y, priors: HyperPriors, j: int, mode: EnsembleFit):
    """Slice-sample `mode.count` hyperparameter vectors for one output."""
    loc, scale = priors.pack(j)
    theta0 = _map_theta(sqdiff, y, priors, j, restarts=1)
    lo, hi = loc - 10 * scale, loc + 10 * scale

    def logp(theta):
        if np.any(theta < lo) or np.any(theta > hi):
            return -np.inf
        return _lml_from_theta(theta, sqdiff, y) + priors.log_density(j, theta)

    rng = substream(mode.seed, "hyper-slice", j)
    steps = mode.burnin + mode.count * mode.thin
    chain = _slice_sample(logp, theta0, scale, steps, rng)
    return chain[mode.burnin + mode.thin - 1::mode.thin][:mode.count]


def _factorize(train_x, train_h, hypers: KernelHyperparams) -> FittedMember:
    """Cache per-output Cholesky factors and solved weights.

    Weights are refined against the jitter-free kernel system (the jittered
    factor acts as a preconditioner), so the posterior mean interpolates the
    noise-free observations without the jitter bias.
    """
    n, m = train_h.shape
    sqdiff = kernels.pairwise_sqdiff(train_x, train_x)
    chol_factors = np.empty((m, n, n))
    weights = np.empty((n, m))
    jitter_used = np.empty(m)
    for j in range(m):
        corr = _correlation(sqdiff, hypers.lengthscales[j])
        factor, rel = kernels.chol_with_jitter(corr, hypers.signal_variance[j], hypers.jitter)
        chol_factors[j] = factor
        bare = hypers.signal_variance[j] * corr
        residual = train_h[:, j] - hypers.constant_mean[j]
        w = sla.cho_solve((factor, True), residual, check_finite=False)
        gap = residual - bare @ w
        scale = max(np.max(np.abs(residual)), 1.0)
        for _ in range(4):
            if np.max(np.abs(gap)) <= 1e-10 * scale:
                break
            step = sla.cho_solve((factor, True), gap, check_finite=False)
            new_gap = residual - bare @ (w + step)
            if np.max(np.abs(new_gap)) >= np.max(np.abs(gap)):
                break
            w = w + step
            gap = new_gap
        weights[:, j] = w
        jitter_used[j] = max(rel, hypers.jitter)
    return FittedMember(hypers=hypers, chol_factors=chol_factors, weights=weights,
                        jitter_used=jitter_used)


def _check_training_inputs(train_x, train_h, domain):
    n = train_x.shape[0]
    if n < 1:
        raise ValueError("fit requires at least one observation")
    if not (np.all(np.isfinite(train_x)) and np.all(np.isfinite(train_h))):
        raise ValueError("training data must be finite")
    if domain is not None:
        for row in train_x:
            if not domain.contains(row, atol=1e-12):
                raise ValueError("training input outside the domain")
    for i in range(n):
        gaps = np.max(np.abs(train_x[i + 1:] - train_x[i]), axis=1) if i + 1 < n else np.array([])
        if gaps.size and np.min(gaps) < DUPLICATE_TOL:
            raise DuplicatePoint(f"training inputs {i} and {i + 1 + int(np.argmin(gaps))} coincide")


def fit(train_x: np.ndarray, train_h: np.ndarray, mode, priors: HyperPriors | None = None,
        domain: BoxDomain | None = None) -> MultiOutputGPModel:
    """Fit the independent-output model.

    mode is MapFit(), EnsembleFit(count, seed), or FixedFit(hypers). Ensemble
    fits are bit-reproducible for a fixed (data, mode) pair.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    train_h = np.atleast_2d(np.asarray(train_h, dtype=float))
    _check_training_inputs(train_x, train_h, domain)
    m = train_h.shape[1]

    if isinstance(mode, FixedFit):
        member = _factorize(train_x, train_h, mode.hypers)
        return MultiOutputGPModel(train_x=train_x, train_h=train_h, members=(member,), priors=priors)

    if priors is None:
        priors = HyperPriors.from_data(train_x, train_h, domain)
    sqdiff = kernels.pairwise_sqdiff(train_x, train_x)

    if isinstance(mode, MapFit):
        thetas = [[_map_theta(sqdiff, train_h[:, j], priors, j) for j in range(m)]]
    elif isinstance(mode, EnsembleFit):
        if mode.count < 1:
            raise ValueError("ensemble count must be >= 1")
        per_output = [_ensemble_thetas(sqdiff, train_h[:, j], priors, j, mode) for j in range(m)]
        thetas = [[per_output[j][k] for j in range(m)] for k in range(mode.count)]
    else:
        raise TypeError(f"unknown fit mode: {mode!r}")

    members = []
    for member_thetas in thetas:
        hypers = KernelHyperparams(
            constant_mean=np.array([t[0] for t in member_thetas]),
            signal_variance=np.exp([t[1] for t in member_thetas]),
            lengthscales=np.exp([t[2:] for t in member_thetas]),
        )
        members.append(_factorize(train_x, train_h, hypers))
    return MultiOutputGPModel(train_x=train_x, train_h=train_h, members=tuple(members), priors=priors)


def prior_model(hypers: KernelHyperparams) -> MultiOutputGPModel:
    """Model with no observations: the posterior is the prior everywhere."""
    m, d = hypers.num_outputs, hypers.dim
    member = FittedMember(hypers=hypers, chol_factors=np.empty((m, 0, 0)),
                          weights=np.empty((0, m)), jitter_used=np.full(m, hypers.jitter))
    return MultiOutputGPModel(train_x=np.empty((0, d)), train_h=np.empty((0, m)),
                              members=(member,))


# ---------------------------------------------------------------------------
# Posterior queries


def _member(model: MultiOutputGPModel, member: int) -> FittedMember:
    if not 0 <= member < model.ensemble_size:
        raise IndexError(f"member {member} out of range for ensemble of {model.ensemble_size}")
    return model.members[member]


def posterior_batch(model: MultiOutputGPModel, points: np.ndarray, member: int = 0):
    """Means and per-output variances at a batch of points.

    Returns (means, variances), both (q, m). Cost O(m n^2) per point after the
    fit-time factorization.
    """
    mem = _member(model, member)
    hyp = mem.hypers
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = points.shape[0]
    m = model.num_outputs
    if model.num_points == 0:
        return (np.tile(hyp.constant_mean, (q, 1)), np.tile(hyp.signal_variance, (q, 1)))
    sqdiff = kernels.pairwise_sqdiff(points, model.train_x)  # (q, n, d)
    z = np.tensordot(sqdiff, (0.5 / hyp.lengthscales**2).T, axes=([2], [0]))  # (q, n, m)
    kstar = hyp.signal_variance[None, None, :] * np.exp(-z)
    means = hyp.constant_mean[None, :] + np.einsum("qnm,nm->qm", kstar, mem.weights)
    variances = np.empty((q, m))
    for j in range(m):
        a = sla.solve_triangular(mem.chol_factors[j], kstar[:, :, j].T, lower=True, check_finite=False)
        variances[:, j] = hyp.signal_variance[j] - np.einsum("nq,nq->q", a, a)
    np.clip(variances, 0.0, None, out=variances)
    return means, variances


def posterior_grad_batch(model: MultiOutputGPModel, points: np.ndarray, member: int = 0):
    """Batch posterior with spatial derivatives.

    Returns (means, variances, d_means, d_vars, degenerate) with shapes
    (q, m), (q, m), (q, m, d), (q, m, d), (q,). degenerate marks points where
    some output's variance sits below the stability floor; derivative values
    are still returned there but are not trustworthy.
    """
    mem = _member(model, member)
    hyp = mem.hypers
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q = points.shape[0]
    m, d = model.num_outputs, model.dim
    if model.num_points == 0:
        means = np.tile(hyp.constant_mean, (q, 1))
        variances = np.tile(hyp.signal_variance, (q, 1))
        return means, variances, np.zeros((q, m, d)), np.zeros((q, m, d)), np.zeros(q, dtype=bool)
    diff = points[:, None, :] - model.train_x[None, :, :]          # (q, n, d)
    sqdiff = diff**2
    inv_ls2 = 1.0 / hyp.lengthscales**2                            # (m, d)
    z = np.tensordot(sqdiff, (0.5 * inv_ls2).T, axes=([2], [0]))   # (q, n, m)
    kstar = hyp.signal_variance[None, None, :] * np.exp(-z)
    means = hyp.constant_mean[None, :] + np.einsum("qnm,nm->qm", kstar, mem.weights)
    d_means = -np.einsum("qnj,nj,qnk,jk->qjk", kstar, mem.weights, diff, inv_ls2)

    variances = np.empty((q, m))
    beta = np.empty((q, model.num_points, m))
    for j in range(m):
        b = sla.cho_solve((mem.chol_factors[j], True), kstar[:, :, j].T, check_finite=False)  # (n, q)
        beta[:, :, j] = b.T
        variances[:, j] = hyp.signal_variance[j] - np.einsum("nq,nq->q", kstar[:, :, j].T, b)
    np.clip(variances, 0.0, None, out=variances)
    d_vars = 2.0 * np.einsum("qnj,qnj,qnk,jk->qjk", beta, kstar, diff, inv_ls2)
    floor = VARIANCE_FLOOR_REL * hyp.signal_variance[None, :]
    degenerate = np.any(variances < floor, axis=1)
    return means, variances, d_means, d_vars, degenerate


def _diag_posterior(mean, var, d_mean=None, d_var=None) -> GaussianPosterior:
    m = mean.shape[0]
    std = np.sqrt(var)
    d_chol = None
    if d_mean is not None:
        d_chol = np.zeros((m, m, d_var.shape[1]))
        idx = np.arange(m)
        d_chol[idx, idx, :] = d_var / (2.0 * std[:, None])
    return GaussianPosterior(mean=mean, cov=np.diag(var), chol=np.diag(std),
                             d_mean=d_mean, d_chol=d_chol)


def posterior(model: MultiOutputGPModel, x: np.ndarray, member: int = 0) -> GaussianPosterior:
    """Posterior at a single point for one ensemble member."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("query point must be finite")
    means, variances = posterior_batch(model, x[None, :], member)
    return _diag_posterior(means[0], variances[0])


def posterior_with_gradients(model: MultiOutputGPModel, x: np.ndarray,
                             member: int = 0) -> GaussianPosterior:
    """Posterior at a single point with d_mean and d_chol populated.

    Raises DegeneratePoint when any output's variance is below the stability
    floor (callers should treat the acquisition gradient as zero there).
    """
    x = np.asarray(x, dtype=float)
    means, variances, d_means, d_vars, degenerate = posterior_grad_batch(model, x[None, :], member)
    if degenerate[0]:
        raise DegeneratePoint("posterior variance below the derivative stability floor")
    return _diag_posterior(means[0], variances[0], d_means[0], d_vars[0])
