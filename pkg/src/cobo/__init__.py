"""Bayesian optimization for composite objectives f(x) = g(h(x))."""

__version__ = "0.1.0"

from .domain import BoxDomain
from .gp import (EnsembleFit, FixedFit, GaussianPosterior, HyperPriors,
                 KernelHyperparams, MapFit, MultiOutputGPModel, fit, posterior,
                 posterior_with_gradients)
from .acquisition import (McEstimate, OuterFunction, ei_cf_grad_sample, ei_cf_mc,
                          ei_closed_form, ensemble_average, pi_cf_saa,
                          posterior_mean_f)
from .acqopt import CmaesConfig, SgaConfig, maximize_ei_cf, maximize_saa, propose_random
from .bo import Incumbent, LoopConfig, Method, RunTrace, initial_design, recommend, run
from .problems import CompositeProblem, get_problem, problem_names, regret

__all__ = [
    "BoxDomain", "CmaesConfig", "CompositeProblem", "EnsembleFit", "FixedFit",
    "GaussianPosterior", "HyperPriors", "Incumbent", "KernelHyperparams",
    "LoopConfig", "MapFit", "McEstimate", "Method", "MultiOutputGPModel",
    "OuterFunction", "RunTrace", "SgaConfig", "ei_cf_grad_sample", "ei_cf_mc",
    "ei_closed_form", "ensemble_average", "fit", "get_problem", "initial_design",
    "maximize_ei_cf", "maximize_saa", "pi_cf_saa", "posterior",
    "posterior_mean_f", "posterior_with_gradients", "problem_names",
    "propose_random", "recommend", "regret", "run",
]
