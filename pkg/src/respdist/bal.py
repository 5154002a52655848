"""Active-learning driver: initial design, fit, curve estimation, stopping
check, acquisition by maximizing the learning function, and enrichment.

The loop stops once the grid maximum of the CDF/CCDF CoV upper bounds has
been below epsilon on the required number of consecutive checks. A
passing check acquires no new point; the surrogate is refit (fresh
multi-start draw) and re-checked, so convergence is confirmed on
consecutive fits without spending simulator calls.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gp, lowdisc, posterior
from .stats import joint_pdf, std_normal_cdf

__all__ = [
    "ALConfig", "GAConfig", "IterationRecord", "RunTrace",
    "truncation_box", "initial_design", "critical_y", "learning_function",
    "acquire", "run",
]


@dataclass
class GAConfig:
    population: int = 0          # 0 -> 50*d capped at 500
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float = 0.0   # 0 -> 1/d
    elitism: int = 2
    restarts: int = 3

    def resolved(self, d: int) -> "GAConfig":
        pop = self.population or min(50 * d, 500)
        mut = self.mutation_rate or 1.0 / d
        return GAConfig(pop, self.generations, self.crossover_rate,
                        mut, self.elitism, self.restarts)


@dataclass
class ALConfig:
    N: int = 500_000
    n0: int = 10
    rho1: float = 1e-5
    rho2: float = 1e-8
    h: int = 100
    p: float = 5e-5
    lam: float = 2.0
    epsilon: float = 0.20
    consecutive_required: int = 2
    ga: GAConfig = field(default_factory=GAConfig)
    max_iterations: int = 500
    seed: int = 0
    scramble: bool = False
    fit_restarts: int = 5

    def validate(self):
        if not 0.0 < self.rho2 <= self.rho1 < 0.5:
            raise ValueError("require 0 < rho2 <= rho1 < 0.5")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.n0 < 2:
            raise ValueError("n0 must be >= 2")
        if self.consecutive_required < 1:
            raise ValueError("consecutive_required must be >= 1")
        if not 0.0 < self.p < 0.5:
            raise ValueError("p must lie in (0, 0.5)")


@dataclass
class IterationRecord:
    n: int
    y_star: float
    max_H: float
    acquired_x: np.ndarray | None
    acquired_y: float | None
    wall_time: float
    max_sigma_bar: float = 0.0


@dataclass
class RunTrace:
    iterations: list
    final_curves: posterior.CurveEstimate
    total_calls: int
    converged: bool
    design_X: np.ndarray | None = None
    design_Y: np.ndarray | None = None


class _CountingSimulator:
    """Wraps the simulator to account for every call made by the loop."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        try:
            return float(self.fn(np.asarray(x, dtype=float)))
        except Exception as exc:
            raise RuntimeError(f"simulator failed at input {np.asarray(x)}") from exc


def truncation_box(marginals, rho: float):
    """Per-dimension [F^-1(rho), F^-1(1-rho)] truncation bounds."""
    if not 0.0 < rho < 0.5:
        raise ValueError("rho must lie in (0, 0.5)")
    lower = np.array([m.inverse_cdf(rho) for m in marginals])
    upper = np.array([m.inverse_cdf(1.0 - rho) for m in marginals])
    return lower, upper


def initial_design(marginals, cfg: ALConfig, simulator):
    """Hammersley points in the rho1-truncated box, pushed through g."""
    d = len(marginals)
    if cfg.n0 == 1:
        warnings.warn("n0=1 gives a single-point initial design")
    lower, upper = truncation_box(marginals, cfg.rho1)
    unit = lowdisc.generate_unit_points(
        lowdisc.SequenceSpec("hammersley", d, cfg.n0)
    )
    X = lowdisc.map_to_box(unit, lower, upper)
    Y = np.array([simulator(x) for x in X])
    return X, Y


def critical_y(curves: posterior.CurveEstimate):
    """Grid point maximizing H = max(CoV_cdf, CoV_ccdf); ties -> smallest y."""
    H = np.maximum(curves.cov_cdf, curves.cov_ccdf)
    t = int(np.argmax(H))
    return float(curves.grid.y[t]), float(H[t])


def learning_function(model, X, y_star: float, marginals):
    """sqrt(Phi(z) Phi(-z)) * f_X(x) with z the standardized misfit at y_star.

    Accepts a single point or a batch of rows; returns matching shape.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    Xm = np.atleast_2d(X)
    mean, std = model.predict(Xm)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(mean))))
    ok = std > floor
    z = np.where(ok, (y_star - mean) / np.where(ok, std, 1.0), 0.0)
    phi = std_normal_cdf(z)
    root = np.where(ok, np.sqrt(phi * (1.0 - phi)), 0.0)
    out = root * joint_pdf(marginals, Xm)
    return float(out[0]) if single else out


def _ga_maximize(objective, lower, upper, ga: GAConfig, rng, seeds=None):
    """Box-constrained GA: tournament selection, SBX crossover, Gaussian
    mutation, elitism. objective is vectorized over rows."""
    d = lower.size
    span = upper - lower
    best_x, best_f = None, -np.inf
    for _ in range(ga.restarts):
        pop = lower + rng.random((ga.population, d)) * span
        if seeds is not None:
            k = min(len(seeds), ga.population)
            pop[:k] = seeds[:k]
        fit = objective(pop)
        for _gen in range(ga.generations):
            order = np.argsort(fit)[::-1]
            elite = pop[order[: ga.elitism]]
            # tournament selection, size 3
            idx = rng.integers(0, ga.population, size=(ga.population, 3))
            winners = idx[np.arange(ga.population), np.argmax(fit[idx], axis=1)]
            parents = pop[winners]
            children = parents.copy()
            # SBX crossover on consecutive pairs
            for i in range(0, ga.population - 1, 2):
                if rng.random() < ga.crossover_rate:
                    u = rng.random(d)
                    eta = 15.0
                    beta = np.where(
                        u <= 0.5,
                        (2.0 * u) ** (1.0 / (eta + 1.0)),
                        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
                    )
                    p1, p2 = parents[i], parents[i + 1]
                    children[i] = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
                    children[i + 1] = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
            # per-gene Gaussian mutation
            mask = rng.random((ga.population, d)) < ga.mutation_rate
            children = np.where(
                mask, children + rng.normal(0.0, 0.05, (ga.population, d)) * span,
                children,
            )
            np.clip(children, lower, upper, out=children)
            children[: ga.elitism] = elite
            pop = children
            fit = objective(pop)
        i = int(np.argmax(fit))
        if fit[i] > best_f:
            best_f = float(fit[i])
            best_x = pop[i].copy()
    return best_x, best_f


def acquire(model, y_star: float, marginals, cfg: ALConfig, rng=None):
    """Maximize the learning function over the rho2-truncated box.

    A 1024-point Sobol screening seeds the GA and floors the result, so
    the returned point is never worse than the screening winner.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    lower, upper = truncation_box(marginals, cfg.rho2)
    d = len(marginals)

    def objective(Xmat):
        return learning_function(model, Xmat, y_star, marginals)

    screen = lowdisc.map_to_box(
        lowdisc.generate_unit_points(lowdisc.SequenceSpec("sobol", d, 1024)),
        lower, upper,
    )
    scr_fit = objective(screen)
    order = np.argsort(scr_fit)[::-1]
    ga = cfg.ga.resolved(d)
    x_ga, f_ga = _ga_maximize(objective, lower, upper, ga, rng,
                              seeds=screen[order[:ga.elitism * 4]])
    x_best = screen[order[0]]
    f_best = float(scr_fit[order[0]])
    if x_ga is not None and f_ga >= f_best:
        x_best, f_best = x_ga, f_ga

    # keep the noise-free kernel matrix invertible
    std_dist = np.min(
        np.linalg.norm((model.X - x_best) / model.x_scale, axis=1)
    )
    if std_dist < 1e-10:
        warnings.warn("acquired point duplicates a design point; perturbing")
        step = 1e-6 * model.hyper.lengthscales * model.x_scale
        x_best = np.clip(x_best + step, lower, upper)
    return x_best


def run(problem, cfg: ALConfig) -> RunTrace:
    """Execute the full active-learning procedure and return its trace."""
    cfg.validate()
    d = problem.dimension
    marginals = problem.marginals
    sim = _CountingSimulator(problem.simulator)
    root_ss = np.random.SeedSequence(cfg.seed)
    pool_ss, loop_ss = root_ss.spawn(2)

    scramble_seed = pool_ss.generate_state(1)[0] if cfg.scramble else None
    pool_unit = lowdisc.generate_unit_points(
        lowdisc.SequenceSpec("sobol", d, cfg.N, scramble_seed=scramble_seed)
    )
    pool = lowdisc.map_to_distribution(pool_unit, marginals)

    X, Y = initial_design(marginals, cfg, sim)
    n = cfg.n0

    iterations = []
    curves = None
    consec = 0
    converged = False
    warm = None
    for it in range(cfg.max_iterations):
        t0 = time.perf_counter()
        fit_ss, ga_ss = loop_ss.spawn(2)
        model = gp.fit(X, Y, gp.FitConfig(
            restarts=cfg.fit_restarts,
            seed=fit_ss.generate_state(1)[0],
            warm_start=warm,
        ))
        warm = model.raw_hyper
        field = posterior.evaluate_field(model, pool)
        grid = posterior.calibrate_grid(field, cfg.p, cfg.lam, cfg.h)
        curves = posterior.estimate_curves(field, grid)
        y_star, max_H = critical_y(curves)
        sb_max = float(np.max(curves.sigma_bar))

        if max_H < cfg.epsilon:
            consec += 1
            iterations.append(IterationRecord(
                n, y_star, max_H, None, None, time.perf_counter() - t0,
                sb_max))
            if consec >= cfg.consecutive_required:
                converged = True
                break
            continue
        consec = 0

        rng = np.random.default_rng(ga_ss.generate_state(1)[0])
        x_next = acquire(model, y_star, marginals, cfg, rng)
        y_next = sim(x_next)
        X = np.vstack([X, x_next])
        Y = np.append(Y, y_next)
        n += 1
        iterations.append(IterationRecord(
            n, y_star, max_H, x_next, y_next, time.perf_counter() - t0,
            sb_max))

    total_calls = cfg.n0 + sum(1 for r in iterations if r.acquired_x is not None)
    if total_calls != sim.calls:
        raise AssertionError(
            f"call accounting mismatch: trace says {total_calls}, "
            f"simulator counted {sim.calls}"
        )
    return RunTrace(iterations, curves, total_calls, converged, X, Y)
