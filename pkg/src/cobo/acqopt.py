"""Inner-loop maximizers for acquisition surfaces.

Three engines: multi-start projected stochastic gradient ascent driven by
pathwise gradient samples (for the Monte Carlo expected-improvement surface),
a compact (mu/mu_w, lambda) CMA-ES for sample-average objectives and other
derivative-free surfaces, and uniform random proposal.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import acquisition, gp
from .domain import BoxDomain
from .errors import AllDegenerate
from .rng import antithetic_normal_matrix, stable_key, substream

EVALUATED_POINT_TOL = 1e-8


@dataclass(frozen=True)
class SgaConfig:
    restarts: int = 10
    steps_per_restart: int = 100
    grad_samples_per_step: int = 128
    step_init: float = 0.3    # a0: first step length as a fraction of domain width
    step_decay: float = 0.7   # alpha: step length decays like t^-alpha
    final_ranking_samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")
        if not 0.5 < self.step_decay <= 1.0:
            raise ValueError("step_decay must lie in (0.5, 1]")


@dataclass(frozen=True)
class CmaesConfig:
    population: int | None = None    # default 4 + floor(3 ln d)
    generations: int | None = None   # default cap 100 * d
    initial_sigma: float = 0.25      # fraction of domain width
    seed: int = 0

    def __post_init__(self):
        if self.population is not None and self.population < 4:
            raise ValueError("population must be >= 4")
        if not 0 < self.initial_sigma <= 0.5:
            raise ValueError("initial_sigma must lie in (0, 0.5]")


def propose_random(domain: BoxDomain, noise: np.random.Generator) -> np.ndarray:
    """Uniform proposal over the box, deterministic given the stream."""
    return domain.sample(noise)


# ---------------------------------------------------------------------------
# Stochastic gradient ascent on the MC expected-improvement surface


def _gamma_and_improvement(means, variances, d_means, d_vars, g, f_star, z):
    """Averaged pathwise gradients and improvements for a batch of chains.

    means/variances are (R, m); d_means/d_vars are (R, m, d); z is (R, L, m).
    Mirrors the single-sample gradient op (zero on the non-improving branch,
    chain rule through the diagonal Cholesky otherwise), vectorized over
    chains and draws. Returns (gamma_mean (R, d), ei_estimate (R,)).
    """
    r_count, samples, m = z.shape
    stds = np.sqrt(variances)
    draws = means[:, None, :] + stds[:, None, :] * z         # (R, L, m)
    values = np.asarray(g(draws.reshape(-1, m)), dtype=float).reshape(r_count, samples)
    if not np.all(np.isfinite(values)):
        raise acquisition.OuterFunctionError("outer function returned a non-finite value")
    improvements = np.maximum(values - f_star, 0.0)
    improving = values > f_star
    grads = np.zeros((r_count, samples, m))
    if np.any(improving):
        flat = g.gradient(draws.reshape(-1, m)).reshape(r_count, samples, m)
        grads[improving] = flat[improving]
    safe_stds = np.where(stds > 0, stds, 1.0)
    d_stds = d_vars / (2.0 * safe_stds[:, :, None])          # (R, m, d)
    # gamma_l = (d_mean + z_l * d_std)^T grad_g, contracted over outputs
    gamma = (np.einsum("rlm,rmd->rld", grads, d_means)
             + np.einsum("rlm,rlm,rmd->rld", grads, z, d_stds))
    return gamma.mean(axis=1), improvements.mean(axis=1)


def _screened_starts(model, g, f_star, domain, cfg, incumbent):
    """Chain starts: top of a uniform candidate pool under a cheap
    shared-noise MC score, kept mutually distant so restarts cover distinct
    basins, plus an incumbent-perturbed start when given."""
    rng = substream(cfg.seed, "sga-screen")
    pool = domain.sample(rng, max(64 * cfg.restarts, 256))
    z = rng.standard_normal((min(cfg.grad_samples_per_step, 256), model.num_outputs))
    scores = np.zeros(pool.shape[0])
    for k in range(model.ensemble_size):
        means, variances = gp.posterior_batch(model, pool, k)
        scores += acquisition.ei_mc_values(means, np.sqrt(variances), g, f_star, z)

    min_gap = 0.02 * domain.width
    order = np.argsort(scores)[::-1]
    picked = []
    for idx in order:
        if len(picked) == cfg.restarts:
            break
        if all(np.any(np.abs(pool[idx] - pool[j]) > min_gap) for j in picked):
            picked.append(idx)
    for idx in order:
        if len(picked) == cfg.restarts:
            break
        if idx not in picked:
            picked.append(idx)
    starts = pool[picked].copy()
    if incumbent is not None and cfg.restarts > 1:
        jitter = 0.01 * domain.width * rng.standard_normal(domain.dim)
        starts[0] = domain.project(np.asarray(incumbent, dtype=float) + jitter)
    return starts


def maximize_ei_cf(model: gp.MultiOutputGPModel, g: acquisition.OuterFunction,
                   f_star: float, domain: BoxDomain, cfg: SgaConfig,
                   incumbent: np.ndarray | None = None) -> np.ndarray:
    """Multi-start projected SGA on the ensemble-averaged MC acquisition.

    Each restart runs steps_per_restart ascent steps along the unit-normalized
    average of grad_samples_per_step gradient samples (averaged across
    ensemble members), with per-dimension step length
    step_init * width / t^step_decay. Final iterates and each chain's
    best-visited point are ranked by a shared-noise MC evaluation; the best
    candidate farther than EVALUATED_POINT_TOL from every training input is
    returned. Raises AllDegenerate when every candidate collapsed onto
    training inputs.
    """
    r_count = cfg.restarts
    d = domain.dim
    m = model.num_outputs
    chain_rngs = [substream(cfg.seed, "sga-chain", r) for r in range(r_count)]
    positions = _screened_starts(model, g, f_star, domain, cfg, incumbent)

    best_positions = positions.copy()
    best_values = np.full(r_count, -np.inf)

    for t in range(1, cfg.steps_per_restart + 1):
        z = np.stack([rng.standard_normal((cfg.grad_samples_per_step, m)) for rng in chain_rngs])
        gamma_sum = np.zeros((r_count, d))
        ei_sum = np.zeros(r_count)
        degenerate = np.zeros(r_count, dtype=bool)
        for k in range(model.ensemble_size):
            means, variances, d_means, d_vars, deg = gp.posterior_grad_batch(model, positions, k)
            degenerate |= deg
            gamma, ei = _gamma_and_improvement(means, variances, d_means, d_vars, g, f_star, z)
            gamma_sum += gamma
            ei_sum += ei
        gamma_mean = gamma_sum / model.ensemble_size
        ei_mean = ei_sum / model.ensemble_size

        improved = (~degenerate) & (ei_mean > best_values)
        best_values[improved] = ei_mean[improved]
        best_positions[improved] = positions[improved]

        norms = np.linalg.norm(gamma_mean, axis=1)
        scale = (cfg.step_init / t**cfg.step_decay) * domain.width
        moving = (~degenerate) & (norms > 0)
        positions[moving] = domain.project(
            positions[moving] + scale[None, :] * gamma_mean[moving] / norms[moving, None])
        for r in np.nonzero(degenerate)[0]:
            positions[r] = propose_random(domain, chain_rngs[r])

    rank_z = antithetic_normal_matrix(substream(cfg.seed, "sga-rank"),
                                      2 * (cfg.final_ranking_samples // 2), m)

    def rank(points):
        values = np.zeros(points.shape[0])
        for k in range(model.ensemble_size):
            means, variances = gp.posterior_batch(model, points, k)
            values += acquisition.ei_mc_values(means, np.sqrt(variances), g, f_star, rank_z)
        return values / model.ensemble_size

    def filter_evaluated(points, values):
        if model.num_points:
            gaps = np.abs(points[:, None, :] - model.train_x[None, :, :]).max(axis=2)
            values = np.where(gaps.min(axis=1) > EVALUATED_POINT_TOL, values, -np.inf)
        return values

    candidates = np.concatenate([positions, best_positions])
    scores = filter_evaluated(candidates, rank(candidates))
    if not np.any(np.isfinite(scores)):
        raise AllDegenerate("every ascent restart collapsed onto evaluated points")
    winner = candidates[int(np.argmax(scores))]

    # fixed-noise polish: the step schedule bounds the chains' terminal
    # resolution, so refine the winner on the deterministic SAA surface
    # (antithetic subset keeps the pairing)
    half = rank_z.shape[0] // 2
    quarter = min(512, half)
    z_polish = np.concatenate([rank_z[:quarter], rank_z[half:half + quarter]])

    def polish_cost(points):
        values = np.zeros(points.shape[0])
        for k in range(model.ensemble_size):
            means, variances = gp.posterior_batch(model, points, k)
            values += acquisition.ei_mc_values(means, np.sqrt(variances), g, f_star, z_polish)
        return -values / model.ensemble_size

    width = domain.width
    unit_cost = lambda unit: polish_cost(domain.lower + unit * width)
    polish_rng = np.random.Generator(np.random.PCG64(stable_key(cfg.seed, "sga-polish")))
    unit_winner = (winner - domain.lower) / width
    polished_unit, _ = _cma_minimize(unit_cost, d, max(4, 4 + int(math.log(d) * 3)), 60,
                                     0.02, polish_rng, mean0=unit_winner)
    polished = domain.lower + polished_unit * width

    finalists = np.stack([winner, polished])
    final_scores = filter_evaluated(finalists, rank(finalists))
    return finalists[int(np.argmax(final_scores))]


# ---------------------------------------------------------------------------
# CMA-ES for sample-average (and other derivative-free) objectives


def _cma_defaults(d: int, cfg: CmaesConfig):
    lam = cfg.population if cfg.population is not None else 4 + int(math.floor(3 * math.log(d)))
    lam = max(lam, 4)
    generations = cfg.generations if cfg.generations is not None else 100 * d
    return lam, generations


def _cma_minimize(cost, d: int, lam: int, generations: int, sigma0: float,
                  rng: np.random.Generator, mean0: np.ndarray | None = None):
    """(mu/mu_w, lambda) CMA-ES in the unit cube with clamp repair.

    cost maps a (q, d) batch of points in [0, 1]^d to (q,) values; returns the
    best point ever evaluated and its cost. mean0 overrides the uniform
    random start.
    """
    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)
    cc = (4 + mu_eff / d) / (d + 4 + 2 * mu_eff / d)
    cs = (mu_eff + 2) / (d + mu_eff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mu_eff)
    cmu = min(1 - c1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((d + 2) ** 2 + mu_eff))
    damps = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (d + 1)) - 1) + cs
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))

    mean = rng.uniform(size=d) if mean0 is None else np.asarray(mean0, dtype=float)
    sigma = sigma0
    cov = np.eye(d)
    p_sigma = np.zeros(d)
    p_cov = np.zeros(d)

    best_point = np.clip(mean, 0.0, 1.0)
    best_cost = float(cost(best_point[None, :])[0])
    stagnation = 0
    patience = 25 + int(math.ceil(30 * d / lam))
    improve_tol = 1e-12

    for gen in range(1, generations + 1):
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-20)
        scaled = eigvecs * np.sqrt(eigvals)[None, :]
        z = rng.standard_normal((lam, d))
        y = z @ scaled.T
        x = mean[None, :] + sigma * y
        x_feasible = np.clip(x, 0.0, 1.0)
        values = np.asarray(cost(x_feasible), dtype=float)
        values = np.where(np.isfinite(values), values, np.inf)
        order = np.argsort(values, kind="stable")

        if gen == 1:
            finite = values[np.isfinite(values)]
            spread = float(finite.max() - finite.min()) if finite.size else 0.0
            improve_tol = max(1e-12, 1e-8 * spread)
        if values[order[0]] < best_cost - improve_tol:
            stagnation = 0
        else:
            stagnation += 1
        if values[order[0]] < best_cost:
            best_cost = float(values[order[0]])
            best_point = x_feasible[order[0]].copy()

        y_sel = y[order[:mu]]
        y_w = weights @ y_sel
        mean = np.clip(mean + sigma * y_w, 0.0, 1.0)

        inv_sqrt = eigvecs * (1.0 / np.sqrt(eigvals))[None, :]
        p_sigma = (1 - cs) * p_sigma + math.sqrt(cs * (2 - cs) * mu_eff) * (inv_sqrt @ eigvecs.T @ y_w)
        h_sigma = (np.linalg.norm(p_sigma) / math.sqrt(1 - (1 - cs) ** (2 * gen))) < (1.4 + 2 / (d + 1)) * chi_n
        p_cov = (1 - cc) * p_cov + h_sigma * math.sqrt(cc * (2 - cc) * mu_eff) * y_w
        rank_mu = (y_sel * weights[:, None]).T @ y_sel
        cov = ((1 - c1 - cmu) * cov
               + c1 * (np.outer(p_cov, p_cov) + (1 - h_sigma) * cc * (2 - cc) * cov)
               + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (np.linalg.norm(p_sigma) / chi_n - 1))

        if sigma < 1e-9 or stagnation >= patience:
            break
    return best_point, best_cost


def maximize_saa(objective, domain: BoxDomain, cfg: CmaesConfig,
                 restarts: int = 1) -> np.ndarray:
    """Maximize a (possibly piecewise-constant) objective with CMA-ES.

    objective maps a (q, d) batch of domain points to (q,) values. Runs in
    normalized coordinates with clamp repair; returns the best point ever
    evaluated across restarts, deterministic given cfg.seed.
    """
    d = domain.dim
    lam, generations = _cma_defaults(d, cfg)
    width = domain.width

    def cost(unit_points):
        return -np.asarray(objective(domain.lower + unit_points * width), dtype=float)

    best_point, best_cost = None, np.inf
    for i in range(restarts):
        rng = np.random.Generator(np.random.PCG64(stable_key(cfg.seed, "cma-restart", i)))
        point, value = _cma_minimize(cost, d, lam, generations, cfg.initial_sigma, rng)
        if value < best_cost:
            best_point, best_cost = point, value
    return domain.lower + best_point * width
