"""Acquisition values for the composite objective.

The improvement-based quantities are evaluated under the posterior on the
inner function via the reparameterization h(x) = mu(x) + C(x) Z with Z
standard normal, so every estimator is a pure function of its inputs and an
explicit noise stream. The pathwise gradient sample is zero on the
non-improving branch and the chain rule of g through (mu, C) otherwise;
averaged over Z it is an unbiased estimate of the acquisition gradient.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import OuterFunctionError
from .gp import GaussianPosterior

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class OuterFunction:
    """Cheap known scalarization g applied to the inner function's output.

    fn maps (..., m) arrays to (...) values (vectorized over leading axes);
    grad_fn maps (..., m) to (..., m). When grad_fn is omitted, gradient()
    falls back to central differences with step 1e-6 * max(1, |y|).
    """

    num_outputs: int
    fn: Callable
    grad_fn: Callable | None = None

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(y, dtype=float))

    def gradient(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.grad_fn is not None:
            return self.grad_fn(y)
        out = np.empty_like(y)
        for k in range(self.num_outputs):
            step = 1e-6 * max(1.0, float(np.max(np.abs(y[..., k]))) if y.size else 1.0)
            hi = y.copy()
            lo = y.copy()
            hi[..., k] += step
            lo[..., k] -= step
            out[..., k] = (self.fn(hi) - self.fn(lo)) / (2.0 * step)
        return out


def identity_outer() -> OuterFunction:
    """g(y) = y for a scalar inner function (classical single-output setting)."""
    return OuterFunction(num_outputs=1, fn=lambda y: y[..., 0],
                         grad_fn=lambda y: np.ones_like(y))


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples_used: int


def _checked(g: OuterFunction, y: np.ndarray) -> np.ndarray:
    values = np.asarray(g(y), dtype=float)
    if not np.all(np.isfinite(values)):
        raise OuterFunctionError("outer function returned a non-finite value")
    return values


def _noise_draws(noise, count: int | None, m: int) -> np.ndarray:
    if isinstance(noise, np.ndarray):
        z = np.atleast_2d(noise)
        if count is not None and z.shape[0] != count:
            raise ValueError("fixed noise length disagrees with the requested sample count")
        return z
    if count is None:
        raise ValueError("a sample count is required when drawing from a stream")
    return noise.standard_normal((count, m))


def _improvements(post: GaussianPosterior, g: OuterFunction, f_star: float,
                  z: np.ndarray) -> np.ndarray:
    draws = post.mean[None, :] + z @ post.chol.T
    return np.maximum(_checked(g, draws) - f_star, 0.0)


def _mc_estimate(samples: np.ndarray) -> McEstimate:
    count = samples.shape[0]
    se = float(np.std(samples, ddof=1) / np.sqrt(count)) if count > 1 else 0.0
    return McEstimate(value=float(np.mean(samples)), std_error=se, samples_used=count)


def ei_cf_mc(post: GaussianPosterior, g: OuterFunction, f_star: float,
             count: int | None = None, noise=None) -> McEstimate:
    """Monte Carlo expected improvement of g(h(x)) over f_star.

    noise is either a Generator (count draws are taken) or a fixed (L, m)
    array of standard normals; the estimate is deterministic given the draws.
    """
    z = _noise_draws(noise, count, post.num_outputs)
    return _mc_estimate(_improvements(post, g, f_star, z))


def ei_cf_grad_sample(post: GaussianPosterior, g: OuterFunction, f_star: float,
                      z: np.ndarray) -> np.ndarray:
    """One pathwise gradient sample: zero on the non-improving branch,
    [d_mean + d_chol.Z]^T grad_g(mu + C Z) otherwise."""
    if post.d_mean is None or post.d_chol is None:
        raise ValueError("posterior lacks spatial derivatives; use posterior_with_gradients")
    z = np.asarray(z, dtype=float)
    y = post.mean + post.chol @ z
    if float(_checked(g, y)) <= f_star:
        return np.zeros(post.d_mean.shape[1])
    jac = post.d_mean + np.einsum("jid,i->jd", post.d_chol, z)
    return jac.T @ g.gradient(y)


def ei_cf_grad_batch(post: GaussianPosterior, g: OuterFunction, f_star: float,
                     z: np.ndarray):
    """Vectorized gradient samples.

    Returns (gammas, improvements): (L, d) pathwise gradient samples and the
    (L,) improvement values from the same draws (their mean estimates the
    acquisition itself at no extra cost).
    """
    if post.d_mean is None or post.d_chol is None:
        raise ValueError("posterior lacks spatial derivatives; use posterior_with_gradients")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    draws = post.mean[None, :] + z @ post.chol.T
    values = _checked(g, draws)
    improving = values > f_star
    improvements = np.maximum(values - f_star, 0.0)
    gammas = np.zeros((z.shape[0], post.d_mean.shape[1]))
    if np.any(improving):
        grads = g.gradient(draws[improving])               # (k, m)
        jac = post.d_mean[None, :, :] + np.einsum("jid,li->ljd", post.d_chol, z[improving])
        gammas[improving] = np.einsum("ljd,lj->ld", jac, grads)
    return gammas, improvements


def ei_closed_form(delta, sigma):
    """Expected improvement of a scalar Gaussian: delta*Phi(delta/sigma) +
    sigma*phi(delta/sigma); the sigma=0 limit is the positive part of delta.

    Vectorized; also serves as the exact value of the composite acquisition
    when g is linear (with delta = w.mu - f_star, sigma = sqrt(w.K.w)).
    """
    delta = np.asarray(delta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    scalar = delta.ndim == 0 and sigma.ndim == 0
    safe_sigma = np.where(sigma > 0, sigma, 1.0)
    t = delta / safe_sigma
    value = delta * ndtr(t) + safe_sigma * np.exp(-0.5 * t * t) / _SQRT_2PI
    out = np.where(sigma > 0, value, np.maximum(delta, 0.0))
    return float(out) if scalar else out


def pi_cf_saa(post: GaussianPosterior, g: OuterFunction, f_star: float,
              delta: float, fixed_noise: np.ndarray) -> float:
    """Fraction of the fixed draws with g(mu + C Z) >= f_star + delta.

    Piecewise constant in x for fixed noise; this is the sample-average
    objective handed to the derivative-free maximizer.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = np.atleast_2d(np.asarray(fixed_noise, dtype=float))
    draws = post.mean[None, :] + z @ post.chol.T
    return float(np.mean(_checked(g, draws) >= f_star + delta))


def posterior_mean_f(post: GaussianPosterior, g: OuterFunction,
                     count: int | None = None, noise=None) -> McEstimate:
    """Monte Carlo estimate of the posterior mean of g(h(x))."""
    z = _noise_draws(noise, count, post.num_outputs)
    draws = post.mean[None, :] + z @ post.chol.T
    return _mc_estimate(_checked(g, draws))


def ensemble_average(values):
    """Arithmetic mean across hyperparameter-ensemble members (scalars or
    vectors, e.g. gradient samples)."""
    values = list(values)
    if not values:
        raise ValueError("ensemble average of zero members")
    return np.mean(np.asarray(values, dtype=float), axis=0)


# ---------------------------------------------------------------------------
# Batch-over-points helpers (diagonal posteriors, shared noise)
#
# The optimizers evaluate whole candidate populations against one fixed draw
# matrix; these operate directly on stacked means/stds from posterior_batch.


def ei_mc_values(means: np.ndarray, stds: np.ndarray, g: OuterFunction,
                 f_star: float, z: np.ndarray) -> np.ndarray:
    """(q,) MC expected improvement for q diagonal posteriors, shared draws."""
    draws = means[:, None, :] + stds[:, None, :] * z[None, :, :]
    return np.maximum(_checked(g, draws) - f_star, 0.0).mean(axis=1)


def pi_fractions(means: np.ndarray, stds: np.ndarray, g: OuterFunction,
                 threshold: float, z: np.ndarray) -> np.ndarray:
    """(q,) fraction of shared draws clearing the improvement threshold."""
    draws = means[:, None, :] + stds[:, None, :] * z[None, :, :]
    return (_checked(g, draws) >= threshold).mean(axis=1)


def mean_f_values(means: np.ndarray, stds: np.ndarray, g: OuterFunction,
                  z: np.ndarray) -> np.ndarray:
    """(q,) MC posterior mean of g(h(x)) for q diagonal posteriors."""
    draws = means[:, None, :] + stds[:, None, :] * z[None, :, :]
    return _checked(g, draws).mean(axis=1)
