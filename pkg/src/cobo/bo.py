"""Outer optimization loop: initial design, model-guided stepping, incumbent
tracking, and posterior-mean recommendation for all six methods.

Composite-aware methods (suffix _cf) model the inner function's outputs with
the independent multi-output GP and push the known outer function through the
posterior; plain methods model the scalar objective directly with a
single-output GP and never see the inner function componentwise. Minimization
problems are handled by the caller negating the outer function; the loop
always maximizes.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import acquisition, acqopt, gp, problems
from .domain import BoxDomain
from .errors import AllDegenerate, MissingOptimum, UnknownMethod
from .rng import antithetic_normal_matrix, stable_key, substream

logger = logging.getLogger(__name__)

METHOD_NAMES = ("ei_cf", "pi_cf", "random_cf", "ei", "pi", "random")


@dataclass(frozen=True)
class Method:
    name: str

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise UnknownMethod(f"unknown method {self.name!r}; expected one of {METHOD_NAMES}")

    @property
    def model_kind(self) -> str:
        return "multi_output_on_h" if self.name.endswith("_cf") else "single_output_on_f"

    @property
    def is_composite(self) -> bool:
        return self.model_kind == "multi_output_on_h"


@dataclass(frozen=True)
class LoopConfig:
    """Knobs for one run; defaults follow the shipped experiment protocol."""

    ensemble_size: int = 10
    ensemble_burnin: int = 100
    ensemble_thin: int = 10
    sga_restarts: int = 10
    sga_steps: int = 100
    sga_grad_samples: int = 128
    sga_step_init: float = 0.3
    sga_step_decay: float = 0.7
    sga_ranking_samples: int = 4096
    cma_population: int | None = None
    cma_generations: int | None = None
    cma_initial_sigma: float = 0.25
    classical_restarts: int = 10
    pi_delta: float = 0.01
    pi_saa_samples: int = 50
    recommend_samples: int = 4096
    recommend_search_samples: int = 512
    recommend_restarts: int = 1


@dataclass(frozen=True)
class Incumbent:
    """Best observed composite value and its location."""

    f_star: float
    x_star: np.ndarray

    @classmethod
    def from_history(cls, train_x: np.ndarray, train_f: np.ndarray) -> "Incumbent":
        best = int(np.argmax(train_f))
        return cls(f_star=float(train_f[best]), x_star=train_x[best])


@dataclass
class IterationRecord:
    iteration: int
    x: np.ndarray | None
    h: np.ndarray | None
    f: float | None
    f_star: float
    x_rec: np.ndarray
    f_rec: float
    regret: float
    wall_ms: float


@dataclass
class RunTrace:
    problem: str
    method: str
    seed: int
    budget: int
    config: LoopConfig
    design_x: np.ndarray
    design_h: np.ndarray
    design_f: np.ndarray
    records: list[IterationRecord] = field(default_factory=list)
    final_hypers: list = field(default_factory=list)   # per-member dicts, final model

    @property
    def num_evaluations(self) -> int:
        return self.design_x.shape[0] + sum(1 for r in self.records if r.x is not None)


@dataclass
class BoState:
    """Mutable loop state; the cached model is refit lazily when stale."""

    problem: problems.CompositeProblem
    method: Method
    cfg: LoopConfig
    seed: int
    train_x: np.ndarray
    train_h: np.ndarray
    train_f: np.ndarray
    model: gp.MultiOutputGPModel | None = None
    model_size: int = -1

    @property
    def incumbent(self) -> Incumbent:
        return Incumbent.from_history(self.train_x, self.train_f)

    @property
    def f_star(self) -> float:
        return self.incumbent.f_star

    @property
    def x_star(self) -> np.ndarray:
        return self.incumbent.x_star

    @property
    def num_evaluations(self) -> int:
        return self.train_x.shape[0]


def initial_design(domain: BoxDomain, d: int, noise: np.random.Generator) -> np.ndarray:
    """2(d+1) uniform points, re-drawn on (vanishingly unlikely) collisions."""
    if d != domain.dim:
        raise ValueError("d disagrees with the domain dimension")
    count = 2 * (d + 1)
    points = domain.sample(noise, count)
    for i in range(1, count):
        while np.min(np.max(np.abs(points[:i] - points[i]), axis=1)) < gp.DUPLICATE_TOL:
            points[i] = domain.sample(noise)
    return points


def _new_state(problem, method: Method, cfg: LoopConfig, seed: int) -> BoState:
    design_rng = substream(seed, "design")
    xs = initial_design(problem.domain, problem.domain.dim, design_rng)
    hs = np.stack([problem.inner(x) for x in xs])
    fs = np.array([float(problem.outer(h)) for h in hs])
    return BoState(problem=problem, method=method, cfg=cfg, seed=seed,
                   train_x=xs, train_h=hs, train_f=fs)


def _ensure_model(state: BoState) -> gp.MultiOutputGPModel:
    if state.model is not None and state.model_size == state.num_evaluations:
        return state.model
    cfg = state.cfg
    if state.method.is_composite:
        targets = state.train_h
    else:
        targets = state.train_f[:, None]
    mode = gp.EnsembleFit(count=cfg.ensemble_size,
                          seed=stable_key(state.seed, state.method.name, "fit", state.num_evaluations),
                          burnin=cfg.ensemble_burnin, thin=cfg.ensemble_thin)
    state.model = gp.fit(state.train_x, targets, mode, domain=state.problem.domain)
    state.model_size = state.num_evaluations
    return state.model


def _model_outer(state: BoState) -> acquisition.OuterFunction:
    """Outer function seen by the acquisition: g for composite methods, the
    identity for plain methods (whose model already targets f)."""
    return state.problem.outer if state.method.is_composite else acquisition.identity_outer()


def _saa_objective(model, g, values_fn):
    """Batch objective averaging values_fn(means, stds) over ensemble members."""

    def objective(points):
        points = np.atleast_2d(points)
        total = None
        for k in range(model.ensemble_size):
            mu, var = gp.posterior_batch(model, points, k)
            vals = values_fn(mu, np.sqrt(var))
            total = vals if total is None else total + vals
        return total / model.ensemble_size

    return objective


def classical_ei_surface(model, f_star: float):
    """Ensemble-averaged closed-form expected improvement on a plain model."""

    def objective(points):
        points = np.atleast_2d(points)
        total = np.zeros(points.shape[0])
        for k in range(model.ensemble_size):
            mu, var = gp.posterior_batch(model, points, k)
            total += acquisition.ei_closed_form(mu[:, 0] - f_star, np.sqrt(var[:, 0]))
        return total / model.ensemble_size

    return objective


def _propose(state: BoState) -> np.ndarray:
    cfg = state.cfg
    method = state.method
    iteration_key = state.num_evaluations
    domain = state.problem.domain

    if method.name in ("random", "random_cf"):
        return acqopt.propose_random(domain, substream(state.seed, method.name, "random", iteration_key))

    model = _ensure_model(state)
    g = _model_outer(state)
    f_star = state.f_star

    if method.name == "ei_cf":
        sga = acqopt.SgaConfig(
            restarts=cfg.sga_restarts, steps_per_restart=cfg.sga_steps,
            grad_samples_per_step=cfg.sga_grad_samples, step_init=cfg.sga_step_init,
            step_decay=cfg.sga_step_decay, final_ranking_samples=cfg.sga_ranking_samples,
            seed=stable_key(state.seed, method.name, "sga", iteration_key))
        try:
            return acqopt.maximize_ei_cf(model, g, f_star, domain, sga, incumbent=state.x_star)
        except AllDegenerate:
            logger.warning("all ascent restarts degenerate at n=%d; falling back to a random proposal",
                           iteration_key)
            return acqopt.propose_random(domain, substream(state.seed, method.name, "fallback", iteration_key))

    cma = acqopt.CmaesConfig(population=cfg.cma_population, generations=cfg.cma_generations,
                             initial_sigma=cfg.cma_initial_sigma,
                             seed=stable_key(state.seed, method.name, "cma", iteration_key))
    if method.name in ("pi_cf", "pi"):
        noise = substream(state.seed, method.name, "pi-noise", iteration_key)
        z = noise.standard_normal((cfg.pi_saa_samples, model.num_outputs))
        threshold = f_star + cfg.pi_delta
        objective = _saa_objective(model, g, lambda mu, sd: acquisition.pi_fractions(mu, sd, g, threshold, z))
        return acqopt.maximize_saa(objective, domain, cma)
    if method.name == "ei":
        return acqopt.maximize_saa(classical_ei_surface(model, f_star), domain, cma,
                                   restarts=cfg.classical_restarts)
    raise UnknownMethod(method.name)


def _dedup(state: BoState, x: np.ndarray) -> np.ndarray:
    """The loop never evaluates an already-observed input."""
    rng = substream(state.seed, state.method.name, "dedup", state.num_evaluations)
    while np.min(np.max(np.abs(state.train_x - x), axis=1)) < gp.DUPLICATE_TOL:
        x = acqopt.propose_random(state.problem.domain, rng)
    return x


def bo_step(state: BoState) -> BoState:
    """One iteration: fit (if stale), propose, evaluate, append."""
    x = _dedup(state, _propose(state))
    h = state.problem.inner(x)
    f = float(state.problem.outer(h))
    state.train_x = np.vstack([state.train_x, x[None, :]])
    state.train_h = np.vstack([state.train_h, h[None, :]])
    state.train_f = np.append(state.train_f, f)
    return state


def recommend(state: BoState) -> np.ndarray:
    """Point with the best (implied) posterior mean of the objective;
    evaluated points always compete, with ties broken toward them.

    For composite methods the inner search runs on a smaller shared draw set
    (recommend_search_samples, antithetic) and the final candidate scoring
    uses the full recommend_samples draws.
    """
    cfg = state.cfg
    model = _ensure_model(state)
    domain = state.problem.domain
    iteration_key = state.num_evaluations

    if state.method.is_composite:
        g = state.problem.outer
        noise = substream(state.seed, state.method.name, "rec-noise", iteration_key)
        z_full = antithetic_normal_matrix(noise, cfg.recommend_samples, model.num_outputs)
        z_search = z_full[np.r_[0:cfg.recommend_search_samples // 2,
                                cfg.recommend_samples // 2:
                                cfg.recommend_samples // 2 + cfg.recommend_search_samples // 2]]
        search_objective = _saa_objective(
            model, g, lambda mu, sd: acquisition.mean_f_values(mu, sd, g, z_search))
        objective = _saa_objective(
            model, g, lambda mu, sd: acquisition.mean_f_values(mu, sd, g, z_full))
    else:
        search_objective = objective = _saa_objective(model, None, lambda mu, sd: mu[:, 0])

    cma = acqopt.CmaesConfig(population=cfg.cma_population, generations=cfg.cma_generations,
                             initial_sigma=cfg.cma_initial_sigma,
                             seed=stable_key(state.seed, state.method.name, "rec-cma", iteration_key))
    searched = acqopt.maximize_saa(search_objective, domain, cma, restarts=cfg.recommend_restarts)
    candidates = np.vstack([state.train_x, searched[None, :]])
    scores = objective(candidates)
    return candidates[int(np.argmax(scores))]


def run(problem, method, budget: int, seed: int,
        cfg: LoopConfig | None = None) -> RunTrace:
    """Full loop: initial design, `budget` model-guided evaluations, and a
    recommendation after every stage. Deterministic given the seed."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if isinstance(method, str):
        method = Method(method)
    cfg = cfg or LoopConfig()
    state = _new_state(problem, method, cfg, seed)
    trace = RunTrace(problem=problem.name, method=method.name, seed=seed, budget=budget,
                     config=cfg, design_x=state.train_x.copy(), design_h=state.train_h.copy(),
                     design_f=state.train_f.copy())

    if problem.f_max_true is None:
        raise MissingOptimum(f"problem {problem.name!r} has no recorded optimum for regret")

    def record(iteration, x, h, f, started):
        x_rec = recommend(state)
        f_rec = problem.f(x_rec)
        trace.records.append(IterationRecord(
            iteration=iteration, x=x, h=h, f=f, f_star=state.f_star,
            x_rec=x_rec, f_rec=f_rec, regret=problem.f_max_true - f_rec,
            wall_ms=(time.perf_counter() - started) * 1e3))

    started = time.perf_counter()
    record(0, None, None, None, started)
    for i in range(1, budget + 1):
        started = time.perf_counter()
        bo_step(state)
        record(i, state.train_x[-1], state.train_h[-1], float(state.train_f[-1]), started)
    trace.final_hypers = [h.to_dict() for h in _ensure_model(state).hyper_ensemble]
    return trace
