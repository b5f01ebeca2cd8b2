"""Benchmark problem catalog.

Every problem exposes the expensive inner function h, the cheap outer
function g with its gradient, the search box, and true-optimum metadata for
regret reporting. All problems are registered as maximizations of g(h(x));
sum-of-squares calibration objectives are therefore negated inside g.
"""

import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.optimize

from . import kernels
from .acquisition import OuterFunction
from .domain import BoxDomain
from .errors import MissingOptimum, UnknownProblem
from .rng import substream


@dataclass(frozen=True)
class CompositeProblem:
    """A composite objective f(x) = g(h(x)) over a box domain."""

    name: str
    domain: BoxDomain
    num_outputs: int
    inner: callable                      # (d,) -> (m,)
    inner_batch: callable                # (q, d) -> (q, m)
    outer: OuterFunction
    f_max_true: float | None = None
    x_ref: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    def f(self, x: np.ndarray) -> float:
        return float(self.outer(self.inner(np.asarray(x, dtype=float))))

    def f_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.outer(self.inner_batch(np.atleast_2d(xs))), dtype=float)


def regret(problem: CompositeProblem, x: np.ndarray) -> float:
    """Simple regret of a point: true maximum minus its objective value."""
    if problem.f_max_true is None:
        raise MissingOptimum(f"problem {problem.name!r} has no recorded optimum")
    return problem.f_max_true - problem.f(x)


# ---------------------------------------------------------------------------
# Langermann (d=2, m=5)

_LANGERMANN_A = np.array([[3.0, 5.0, 2.0, 1.0, 7.0],
                          [5.0, 2.0, 1.0, 4.0, 9.0]])
_LANGERMANN_C = np.array([1.0, 2.0, 5.0, 2.0, 3.0])
# Grid (2000x2000) + L-BFGS polish; see tests/test_problems.py for the oracle.
_LANGERMANN_F_MAX = 4.155809291847786
_LANGERMANN_X_REF = np.array([2.7934022090293906, 1.5972325000958045])


def _langermann_h_batch(xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(xs)
    return ((xs[:, :, None] - _LANGERMANN_A[None, :, :]) ** 2).sum(axis=1)


def _langermann_g(y: np.ndarray) -> np.ndarray:
    return -(_LANGERMANN_C * np.exp(-y / np.pi) * np.cos(np.pi * y)).sum(axis=-1)


def _langermann_grad(y: np.ndarray) -> np.ndarray:
    return _LANGERMANN_C * np.exp(-y / np.pi) * (np.cos(np.pi * y) / np.pi + np.pi * np.sin(np.pi * y))


def langermann() -> CompositeProblem:
    """h_j(x) = sum_i (x_i - A_ij)^2; g(y) = -sum_j c_j exp(-y_j/pi) cos(pi y_j)."""
    return CompositeProblem(
        name="langermann",
        domain=BoxDomain(np.zeros(2), np.full(2, 10.0)),
        num_outputs=5,
        inner=lambda x: _langermann_h_batch(x[None, :])[0],
        inner_batch=_langermann_h_batch,
        outer=OuterFunction(num_outputs=5, fn=_langermann_g, grad_fn=_langermann_grad),
        f_max_true=_LANGERMANN_F_MAX,
        x_ref=_LANGERMANN_X_REF,
    )


# ---------------------------------------------------------------------------
# Rosenbrock (d=5, m=8)


def _rosenbrock_h_batch(xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(xs)
    return np.concatenate([xs[:, 1:] - xs[:, :-1] ** 2, xs[:, :-1]], axis=1)


def _rosenbrock_g(y: np.ndarray) -> np.ndarray:
    quad = y[..., :4]
    lin = y[..., 4:]
    return -(100.0 * quad**2 + (lin - 1.0) ** 2).sum(axis=-1)


def _rosenbrock_grad(y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[..., :4] = -200.0 * y[..., :4]
    out[..., 4:] = -2.0 * (y[..., 4:] - 1.0)
    return out


def rosenbrock() -> CompositeProblem:
    """The 5-d valley, split as h = (x_{j+1} - x_j^2, x_j) and a quadratic g."""
    return CompositeProblem(
        name="rosenbrock5",
        domain=BoxDomain(np.full(5, -2.048), np.full(5, 2.048)),
        num_outputs=8,
        inner=lambda x: _rosenbrock_h_batch(x[None, :])[0],
        inner_batch=_rosenbrock_h_batch,
        outer=OuterFunction(num_outputs=8, fn=_rosenbrock_g, grad_fn=_rosenbrock_grad),
        f_max_true=0.0,
        x_ref=np.ones(5),
    )


# ---------------------------------------------------------------------------
# Environmental pollutant calibration (d=4, m=12)

_ENV_S = np.array([0.0, 1.0, 2.5])
_ENV_T = np.array([15.0, 30.0, 45.0, 60.0])
# s-major enumeration of the (s, t) observation grid
_ENV_GRID_S = np.repeat(_ENV_S, len(_ENV_T))
_ENV_GRID_T = np.tile(_ENV_T, len(_ENV_S))
_ENV_TRUTH = np.array([10.0, 0.07, 1.505, 30.1525])


def concentration(s, t, mass, diffusion, location, spill_time):
    """Two-spill pollutant concentration; the second term is active only
    strictly after the second spill time."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    first = mass / np.sqrt(4.0 * np.pi * diffusion * t) * np.exp(-(s**2) / (4.0 * diffusion * t))
    dt = t - spill_time
    active = dt > 0
    safe_dt = np.where(active, dt, 1.0)
    second = np.where(
        active,
        mass / np.sqrt(4.0 * np.pi * diffusion * safe_dt)
        * np.exp(-((s - location) ** 2) / (4.0 * diffusion * safe_dt)),
        0.0,
    )
    return first + second


def _env_h_batch(xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(xs)
    mass = xs[:, 0:1]
    diffusion = xs[:, 1:2]
    location = xs[:, 2:3]
    spill_time = xs[:, 3:4]
    return concentration(_ENV_GRID_S[None, :], _ENV_GRID_T[None, :],
                         mass, diffusion, location, spill_time)


_ENV_Y_OBS = _env_h_batch(_ENV_TRUTH[None, :])[0]


def environmental() -> CompositeProblem:
    """Calibrate (M, D, L, tau) to grid observations; g is the negated SSE."""
    y_obs = _ENV_Y_OBS

    def g(y):
        return -((y - y_obs) ** 2).sum(axis=-1)

    def grad(y):
        return -2.0 * (y - y_obs)

    return CompositeProblem(
        name="environmental",
        domain=BoxDomain(np.array([7.0, 0.02, 0.01, 30.01]),
                         np.array([13.0, 0.12, 3.0, 30.295])),
        num_outputs=12,
        inner=lambda x: _env_h_batch(x[None, :])[0],
        inner_batch=_env_h_batch,
        outer=OuterFunction(num_outputs=12, fn=g, grad_fn=grad),
        f_max_true=0.0,
        x_ref=_ENV_TRUTH.copy(),
    )


# ---------------------------------------------------------------------------
# GP-generated problems: smooth deterministic proxies built by conditioning a
# seeded stationary field on Latin-hypercube grid values.

_GP_GRID_SIZE = 512


def _latin_hypercube(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    points = np.empty((count, d))
    for k in range(d):
        points[:, k] = (rng.permutation(count) + rng.uniform(size=count)) / count
    return points


class _GpProxy:
    """Posterior-mean surrogate h with one independent component per output."""

    def __init__(self, d: int, m: int, seed):
        rng = substream("gp-problem", seed, "surface")
        self.grid = _latin_hypercube(rng, _GP_GRID_SIZE, d)
        self.lengthscales = np.exp(rng.uniform(np.log(0.1), np.log(0.5), size=(m, d)))
        sqdiff = kernels.pairwise_sqdiff(self.grid, self.grid)
        self.weights = np.empty((_GP_GRID_SIZE, m))
        for j in range(m):
            corr = np.exp(-(sqdiff @ (0.5 / self.lengthscales[j] ** 2)))
            factor, _ = kernels.chol_with_jitter(corr, 1.0)
            values = factor @ rng.standard_normal(_GP_GRID_SIZE)
            self.weights[:, j] = sla.cho_solve((factor, True), values)

    def h_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(xs)
        sqdiff = kernels.pairwise_sqdiff(xs, self.grid)
        z = np.tensordot(sqdiff, (0.5 / self.lengthscales**2).T, axes=([2], [0]))
        return np.einsum("qnm,nm->qm", np.exp(-z), self.weights)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """(m, d) Jacobian of h, for polishing the optimum oracle."""
        diff = x[None, :] - self.grid                        # (n, d)
        inv_ls2 = 1.0 / self.lengthscales**2                 # (m, d)
        kstar = np.exp(-((diff**2) @ (0.5 * inv_ls2).T))     # (n, m)
        return -np.einsum("nj,nj,nk,jk->jk", kstar, self.weights, diff, inv_ls2)


def _polish_max(problem_f, problem_grad, domain: BoxDomain, starts: np.ndarray):
    """L-BFGS-B polish of candidate maximizers; returns (best_x, best_f)."""
    best_x, best_f = None, -np.inf
    bounds = list(zip(domain.lower, domain.upper))
    for x0 in starts:
        res = scipy.optimize.minimize(
            lambda x: -problem_f(x), x0, jac=(lambda x: -problem_grad(x)) if problem_grad else None,
            method="L-BFGS-B", bounds=bounds, options={"maxiter": 200})
        if -res.fun > best_f:
            best_x, best_f = np.asarray(res.x, dtype=float), float(-res.fun)
    return best_x, best_f


def gp_generated(kind: str, instance_seed: int = 0) -> CompositeProblem:
    """Seeded smooth test problems.

    type1: X=[0,1]^4, m=5, g(y) = -||y - y_obs||^2 with y_obs = h(x*) at a
    seeded point (so the true maximum is exactly 0). type2: X=[0,1]^3, m=4,
    g(y) = -sum_j exp(y_j); the true maximum is located by screening 10^4
    random candidates and polishing the best of them.
    """
    if kind not in ("type1", "type2"):
        raise UnknownProblem(f"unknown GP-generated kind {kind!r}")
    d, m = (4, 5) if kind == "type1" else (3, 4)
    proxy = _GpProxy(d, m, (kind, instance_seed))
    domain = BoxDomain(np.zeros(d), np.ones(d))
    rng = substream("gp-problem", (kind, instance_seed), "meta")

    def h_single(x):
        return proxy.h_batch(x[None, :])[0]

    if kind == "type1":
        x_ref = domain.sample(rng)
        y_obs = h_single(x_ref)

        def g(y):
            return -((y - y_obs) ** 2).sum(axis=-1)

        def grad(y):
            return -2.0 * (y - y_obs)

        outer = OuterFunction(num_outputs=m, fn=g, grad_fn=grad)
        f_max = 0.0
    else:
        def g(y):
            return -np.exp(y).sum(axis=-1)

        def grad(y):
            return -np.exp(y)

        outer = OuterFunction(num_outputs=m, fn=g, grad_fn=grad)

        def f_single(x):
            return float(g(h_single(x)))

        def f_grad(x):
            return proxy.jacobian(x).T @ grad(h_single(x))

        candidates = domain.sample(rng, 10_000)
        values = g(proxy.h_batch(candidates))
        order = np.argsort(values)[::-1]
        starts = np.vstack([candidates[order[:64]], proxy.grid[np.argmax(g(proxy.h_batch(proxy.grid)))][None, :]])
        x_ref, f_max = _polish_max(f_single, f_grad, domain, starts)

    name = {"type1": "gp1", "type2": "gp2"}[kind]
    if instance_seed != 0:
        name = f"{name}@{instance_seed}"
    return CompositeProblem(
        name=name, domain=domain, num_outputs=m,
        inner=h_single, inner_batch=proxy.h_batch, outer=outer,
        f_max_true=f_max, x_ref=x_ref)


def gp_identity_1d(instance_seed: int = 0) -> CompositeProblem:
    """1-d scalar GP-sample problem with g = identity (consistency checks)."""
    proxy = _GpProxy(1, 1, ("identity1d", instance_seed))
    domain = BoxDomain(np.zeros(1), np.ones(1))
    outer = OuterFunction(num_outputs=1, fn=lambda y: y[..., 0],
                          grad_fn=lambda y: np.ones_like(y))

    def f_single(x):
        return float(proxy.h_batch(x[None, :])[0, 0])

    grid = np.linspace(0.0, 1.0, 4096)[:, None]
    values = proxy.h_batch(grid)[:, 0]
    starts = grid[np.argsort(values)[::-1][:8]]
    x_ref, f_max = _polish_max(f_single, None, domain, starts)
    return CompositeProblem(
        name=f"gp-identity-1d@{instance_seed}", domain=domain, num_outputs=1,
        inner=lambda x: proxy.h_batch(x[None, :])[0], inner_batch=proxy.h_batch,
        outer=outer, f_max_true=f_max, x_ref=x_ref)


# ---------------------------------------------------------------------------
# Catalog

_CATALOG = {
    "langermann": langermann,
    "rosenbrock5": rosenbrock,
    "environmental": environmental,
    "gp1": lambda: gp_generated("type1", 0),
    "gp2": lambda: gp_generated("type2", 0),
}


def problem_names() -> list[str]:
    return sorted(_CATALOG)


@functools.lru_cache(maxsize=None)
def get_problem(name: str) -> CompositeProblem:
    """Resolve a catalog name; gp1@SEED / gp2@SEED select other instances."""
    if name in _CATALOG:
        return _CATALOG[name]()
    if "@" in name:
        base, _, seed_text = name.partition("@")
        if base in ("gp1", "gp2") and seed_text.isdigit():
            return gp_generated("type1" if base == "gp1" else "type2", int(seed_text))
    raise UnknownProblem(f"unknown problem {name!r}; known: {', '.join(problem_names())}")
