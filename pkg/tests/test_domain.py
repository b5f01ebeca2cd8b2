import numpy as np
import pytest

from cobo.domain import BoxDomain
from cobo.errors import DomainError


def test_bounds_must_be_strictly_ordered():
    with pytest.raises(DomainError):
        BoxDomain(np.array([0.0, 1.0]), np.array([1.0, 1.0]))


def test_degenerate_box_rejected():
    with pytest.raises(DomainError):
        BoxDomain(np.array([0.5]), np.array([0.5]))


def test_nonfinite_bounds_rejected():
    with pytest.raises(DomainError):
        BoxDomain(np.array([0.0]), np.array([np.inf]))


def test_project_clamps_and_is_idempotent():
    dom = BoxDomain(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    x = np.array([-3.0, 5.0])
    p = dom.project(x)
    assert np.array_equal(p, np.array([-1.0, 2.0]))
    assert np.array_equal(dom.project(p), p)
    inside = np.array([0.3, 1.1])
    assert np.array_equal(dom.project(inside), inside)


def test_sample_inside_and_seeded():
    dom = BoxDomain(np.array([2.0, -4.0]), np.array([3.0, -1.0]))
    rng = np.random.default_rng(3)
    pts = dom.sample(rng, 200)
    assert pts.shape == (200, 2)
    assert all(dom.contains(p) for p in pts)
    rng2 = np.random.default_rng(3)
    assert np.array_equal(pts, dom.sample(rng2, 200))


def test_width():
    dom = BoxDomain(np.array([0.0, -1.0]), np.array([10.0, 1.0]))
    assert np.array_equal(dom.width, np.array([10.0, 2.0]))
