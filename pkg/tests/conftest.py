import numpy as np
import pytest

from cobo import gp
from cobo.domain import BoxDomain


@pytest.fixture
def unit_domain_2d():
    return BoxDomain(np.zeros(2), np.ones(2))


@pytest.fixture
def smooth_model_2d(unit_domain_2d):
    """2-d, 2-output model with fixed hyperparameters on smooth data."""
    rng = np.random.default_rng(7)
    xs = rng.uniform(0.05, 0.95, size=(9, 2))
    hs = np.column_stack([
        np.sin(3.0 * xs[:, 0]) + 0.5 * xs[:, 1],
        np.cos(2.0 * xs[:, 1]) - xs[:, 0] ** 2,
    ])
    hypers = gp.KernelHyperparams(
        constant_mean=[0.2, 0.1],
        signal_variance=[1.0, 0.8],
        lengthscales=[[0.4, 0.5], [0.35, 0.6]],
    )
    return gp.fit(xs, hs, gp.FixedFit(hypers), domain=unit_domain_2d)
