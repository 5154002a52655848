"""Bayesian active learning of response probability distributions.

Estimates the CDF/CCDF/PDF of an expensive black-box simulator under
random inputs with a Gaussian-process surrogate, adaptive acquisition,
and quantified numerical uncertainty.
"""

from .bal import ALConfig, GAConfig, RunTrace, run
from .gp import FitConfig, GPModel, Hyperparams, fit, predict
from .posterior import CurveEstimate, PosteriorField, estimate_curves
from .problems import ProblemSpec, get_problem, registered_problems
from .stats import Marginal, lognormal, normal, uniform

__version__ = "0.1.0"

__all__ = [
    "ALConfig", "GAConfig", "RunTrace", "run",
    "FitConfig", "GPModel", "Hyperparams", "fit", "predict",
    "CurveEstimate", "PosteriorField", "estimate_curves",
    "ProblemSpec", "get_problem", "registered_problems",
    "Marginal", "normal", "lognormal", "uniform",
]
