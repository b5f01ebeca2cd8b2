"""Shared fixtures for the squared-scalar minimization scenario.

A scalar inner function observed at four mid-domain points whose values
change sign between at least one consecutive pair; the objective is to
minimize h^2 (registered as maximizing -h^2). Used to check that the
composite acquisition concentrates inside the sign-change brackets while the
plain single-output acquisition does not.
"""

import numpy as np

from cobo import acquisition as acq
from cobo import gp
from cobo.domain import BoxDomain
from cobo.rng import substream

DOMAIN = BoxDomain(np.array([-4.0]), np.array([4.0]))
NEG_SQUARE = acq.OuterFunction(1, fn=lambda y: -(y[..., 0] ** 2), grad_fn=lambda y: -2.0 * y)


def make_instance(seed: int):
    """Seeded 4-observation instance; returns a dict with both fitted models.

    Exactly one sign flip, with large inner-function magnitudes at the flip
    pair and small magnitudes elsewhere, mirroring the geometry where the
    plain model's acquisition prefers the uncertain domain edges while the
    composite one homes in on the guaranteed zero crossing.
    """
    rng = substream("fig1-instance", seed)
    xs = -2.4 + 1.6 * np.arange(4) + rng.uniform(-0.25, 0.25, size=4)
    flip = int(rng.integers(0, 3))
    first = rng.choice([-1.0, 1.0])
    signs = np.array([first if i <= flip else -first for i in range(4)])
    magnitudes = rng.uniform(0.55, 0.8, size=4)
    magnitudes[flip] = rng.uniform(1.0, 1.4)
    magnitudes[flip + 1] = rng.uniform(1.0, 1.4)
    h_vals = signs * magnitudes
    f_vals = -h_vals**2

    h_hypers = gp.KernelHyperparams([0.0], [1.0], [[1.2]])
    model_h = gp.fit(xs[:, None], h_vals[:, None], gp.FixedFit(h_hypers))
    f_hypers = gp.KernelHyperparams([float(np.mean(f_vals))],
                                    [max(float(np.var(f_vals)), 0.05)], [[1.2]])
    model_f = gp.fit(xs[:, None], f_vals[:, None], gp.FixedFit(f_hypers))

    brackets = [(xs[i], xs[i + 1]) for i in range(3) if signs[i] != signs[i + 1]]
    return {
        "xs": xs, "h": h_vals, "f": f_vals, "f_star": float(np.max(f_vals)),
        "model_h": model_h, "model_f": model_f, "brackets": brackets,
    }


def in_bracket(x: float, brackets) -> bool:
    return any(lo < x < hi for lo, hi in brackets)


def grid_argmax_ei_cf(instance, grid: np.ndarray, z: np.ndarray) -> float:
    """Dense-grid argmax of the MC composite acquisition (shared draws)."""
    mu, var = gp.posterior_batch(instance["model_h"], grid[:, None])
    values = acq.ei_mc_values(mu, np.sqrt(var), NEG_SQUARE, instance["f_star"], z)
    return float(grid[int(np.argmax(values))])


def grid_argmax_classical_ei(instance, grid: np.ndarray) -> float:
    """Dense-grid argmax of closed-form expected improvement on the f-model."""
    mu, var = gp.posterior_batch(instance["model_f"], grid[:, None])
    values = acq.ei_closed_form(mu[:, 0] - instance["f_star"], np.sqrt(var[:, 0]))
    return float(grid[int(np.argmax(values))])
