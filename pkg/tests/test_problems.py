import mpmath
import numpy as np
import pytest
import scipy.optimize

from cobo import problems
from cobo.errors import MissingOptimum, UnknownProblem


def _check_outer_gradient(problem, count=100, seed=0, rtol=1e-5):
    """Central finite differences of g at random y drawn near h's range."""
    rng = np.random.default_rng(seed)
    xs = problem.domain.sample(rng, count)
    ys = problem.inner_batch(xs)
    spread = np.maximum(ys.std(axis=0), 1.0)
    ys = ys + 0.3 * spread * rng.normal(size=ys.shape)
    for y in ys:
        grad = problem.outer.gradient(y)
        for k in range(problem.num_outputs):
            step = 1e-6 * max(1.0, abs(y[k]))
            hi, lo = y.copy(), y.copy()
            hi[k] += step
            lo[k] -= step
            fd = (float(problem.outer(hi)) - float(problem.outer(lo))) / (2 * step)
            assert abs(grad[k] - fd) <= rtol * max(1.0, abs(fd))


def _check_f_max_sound(problem, count=100_000, seed=1, chunk=8_192):
    rng = np.random.default_rng(seed)
    xs = problem.domain.sample(rng, count)
    best = -np.inf
    for i in range(0, count, chunk):
        best = max(best, float(problem.f_batch(xs[i:i + chunk]).max()))
    assert best <= problem.f_max_true + 1e-9


class TestLangermann:
    def test_inner_values_at_first_center(self):
        problem = problems.langermann()
        h = problem.inner(np.array([3.0, 5.0]))
        assert np.allclose(h, [0.0, 13.0, 17.0, 5.0, 32.0])

    def test_outer_at_zero(self):
        problem = problems.langermann()
        assert float(problem.outer(np.zeros(5))) == pytest.approx(-13.0)

    def test_reference_point_attains_maximum(self):
        problem = problems.langermann()
        assert problem.f(problem.x_ref) == pytest.approx(problem.f_max_true, abs=1e-9)

    def test_f_max_against_grid_polish_oracle(self):
        """Re-derive the stored optimum: dense grid + gradient polish."""
        problem = problems.langermann()
        lin = np.linspace(0.0, 10.0, 2000)
        gx, gy = np.meshgrid(lin, lin, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        values = np.empty(pts.shape[0])
        for i in range(0, pts.shape[0], 400_000):
            values[i:i + 400_000] = problem.f_batch(pts[i:i + 400_000])
        starts = pts[np.argsort(values)[::-1][:20]]

        def neg_f(x):
            return -problem.f(x)

        def neg_grad(x):
            h = problem.inner(x)
            jac = 2.0 * (x[:, None] - problems._LANGERMANN_A)
            return -(jac @ problem.outer.gradient(h))

        best = np.inf
        for start in starts:
            res = scipy.optimize.minimize(neg_f, start, jac=neg_grad, method="L-BFGS-B",
                                          bounds=[(0, 10), (0, 10)],
                                          options={"ftol": 1e-17, "gtol": 1e-14})
            best = min(best, res.fun)
        assert -best == pytest.approx(problem.f_max_true, abs=1e-9)

    def test_gradient_and_soundness(self):
        problem = problems.langermann()
        _check_outer_gradient(problem)
        _check_f_max_sound(problem)


class TestRosenbrock:
    def test_optimum_at_ones(self):
        problem = problems.rosenbrock()
        h = problem.inner(np.ones(5))
        assert np.array_equal(h, np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=float))
        assert problem.f(np.ones(5)) == 0.0 == problem.f_max_true

    def test_value_at_origin(self):
        problem = problems.rosenbrock()
        assert problem.f(np.zeros(5)) == pytest.approx(-4.0)

    def test_matches_classical_formula(self):
        problem = problems.rosenbrock()
        rng = np.random.default_rng(3)
        xs = problem.domain.sample(rng, 100)
        composed = problem.f_batch(xs)
        classical = -np.sum(100.0 * (xs[:, 1:] - xs[:, :-1] ** 2) ** 2
                            + (xs[:, :-1] - 1.0) ** 2, axis=1)
        assert np.max(np.abs(composed - classical)) <= 1e-10

    def test_gradient_and_soundness(self):
        problem = problems.rosenbrock()
        _check_outer_gradient(problem)
        _check_f_max_sound(problem)


class TestEnvironmental:
    def test_truth_attains_zero_exactly(self):
        problem = problems.environmental()
        assert problem.f(problem.x_ref) == 0.0
        assert problem.f_max_true == 0.0

    def test_concentration_against_high_precision_oracle(self):
        # 50-digit evaluation of the first (pre-second-spill) term at s=0, t=15
        with mpmath.workdps(50):
            expected = mpmath.mpf(10) / mpmath.sqrt(4 * mpmath.pi * mpmath.mpf("0.07") * 15)
        value = problems.concentration(0.0, 15.0, 10.0, 0.07, 1.505, 30.1525)
        assert abs(value - float(expected)) <= 1e-13 * float(expected)

    def test_second_spill_activates_strictly_after_tau(self):
        tau = 30.1525
        at_tau = problems.concentration(1.0, tau, 10.0, 0.07, 1.505, tau)
        before = problems.concentration(1.0, tau - 1e-9, 10.0, 0.07, 1.505, tau)
        after = problems.concentration(1.0, tau + 1e-9, 10.0, 0.07, 1.505, tau)
        # s != L: the second term vanishes in the t -> tau+ limit, so both
        # one-sided values agree with the first term alone
        assert at_tau == pytest.approx(before, rel=1e-9)
        assert after == pytest.approx(before, rel=1e-9)
        assert np.isfinite(at_tau)
        # at s = L the second term blows up just after tau: strict t > tau
        spike = problems.concentration(1.505, tau + 1e-9, 10.0, 0.07, 1.505, tau)
        assert spike > 100.0
        assert problems.concentration(1.505, tau, 10.0, 0.07, 1.505, tau) == pytest.approx(
            problems.concentration(1.505, tau - 1e-12, 10.0, 0.07, 1.505, tau), rel=1e-9)

    def test_observation_grid_is_s_major_12_vector(self):
        problem = problems.environmental()
        h = problem.inner(problem.x_ref)
        assert h.shape == (12,)
        direct = [problems.concentration(s, t, 10.0, 0.07, 1.505, 30.1525)
                  for s in (0.0, 1.0, 2.5) for t in (15.0, 30.0, 45.0, 60.0)]
        assert np.allclose(h, direct)

    def test_gradient_and_soundness(self):
        problem = problems.environmental()
        _check_outer_gradient(problem)
        _check_f_max_sound(problem)


class TestGpGenerated:
    def test_type1_outer_properties(self):
        problem = problems.gp_generated("type1", 0)
        y_obs = problem.inner(problem.x_ref)
        assert float(problem.outer(y_obs)) == 0.0
        rng = np.random.default_rng(5)
        for _ in range(20):
            y = y_obs + rng.normal(size=5) * 0.3
            assert float(problem.outer(y)) < 0.0
        assert problem.f_max_true == 0.0

    def test_type2_outer_at_zero(self):
        problem = problems.gp_generated("type2", 0)
        assert float(problem.outer(np.zeros(4))) == pytest.approx(-4.0)

    def test_determinism_across_constructions(self):
        a = problems.gp_generated("type1", 3)
        b = problems.gp_generated("type1", 3)
        rng = np.random.default_rng(0)
        xs = a.domain.sample(rng, 100)
        assert np.array_equal(a.inner_batch(xs), b.inner_batch(xs))
        assert a.f_max_true == b.f_max_true

    def test_instances_differ_by_seed(self):
        a = problems.gp_generated("type2", 0)
        b = problems.gp_generated("type2", 1)
        rng = np.random.default_rng(0)
        xs = a.domain.sample(rng, 10)
        assert not np.array_equal(a.inner_batch(xs), b.inner_batch(xs))

    def test_f_max_sound(self):
        _check_f_max_sound(problems.gp_generated("type1", 0))
        _check_f_max_sound(problems.gp_generated("type2", 0))

    def test_gradients(self):
        _check_outer_gradient(problems.gp_generated("type1", 0))
        _check_outer_gradient(problems.gp_generated("type2", 0))

    def test_identity_1d_factory(self):
        problem = problems.gp_identity_1d(0)
        assert problem.dim == 1 and problem.num_outputs == 1
        _check_f_max_sound(problem)


class TestRegretAndCatalog:
    def test_regret_zero_at_reference(self):
        for name in ("langermann", "rosenbrock5", "environmental"):
            problem = problems.get_problem(name)
            assert problems.regret(problem, problem.x_ref) == pytest.approx(0.0, abs=1e-9)

    def test_regret_rosenbrock_origin(self):
        assert problems.regret(problems.rosenbrock(), np.zeros(5)) == pytest.approx(4.0)

    def test_missing_optimum(self):
        problem = problems.CompositeProblem(
            name="bare", domain=problems.BoxDomain([0.0], [1.0]), num_outputs=1,
            inner=lambda x: x, inner_batch=lambda xs: xs,
            outer=problems.OuterFunction(1, fn=lambda y: y[..., 0]))
        with pytest.raises(MissingOptimum):
            problems.regret(problem, np.array([0.5]))

    def test_purity_bit_identical(self):
        problem = problems.langermann()
        x = np.array([1.234, 5.678])
        assert np.array_equal(problem.inner(x), problem.inner(x))
        assert problem.f(x) == problem.f(x)

    def test_catalog_lookup(self):
        assert problems.get_problem("langermann").name == "langermann"
        assert problems.get_problem("gp1@2").dim == 4
        with pytest.raises(UnknownProblem):
            problems.get_problem("nosuch")
        with pytest.raises(UnknownProblem):
            problems.gp_generated("type3")

    def test_names(self):
        assert problems.problem_names() == [
            "environmental", "gp1", "gp2", "langermann", "rosenbrock5"]
