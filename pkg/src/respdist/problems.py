"""Benchmark problem registry behind a uniform simulator interface.

Closed-form benchmarks ship with analytical or Monte Carlo reference
generators. External (e.g. finite-element) simulators plug in through a
line-delimited subprocess protocol: the driver writes one request line of
d space-separated decimal reals, the child answers with one decimal real
per line; a malformed reply or nonzero exit is an evaluation error.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass

import numpy as np

from .stats import Marginal, normal, std_normal_cdf, std_normal_pdf, uniform

__all__ = [
    "ProblemSpec", "get_problem", "registered_problems",
    "toy_min", "toy_min_reference", "ishigami", "oscillator",
    "mcs_reference", "ExternalSimulator", "external_problem",
]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dimension: int
    marginals: tuple
    simulator: object                 # d-vector -> float
    simulator_batch: object = None    # n-by-d matrix -> n-vector (optional)
    reference: object = None          # y -> (cdf, ccdf, pdf), when analytical

    def __post_init__(self):
        if len(self.marginals) != self.dimension:
            raise ValueError("marginal count must equal dimension")

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.simulator_batch is not None:
            return np.asarray(self.simulator_batch(X), dtype=float)
        return np.array([self.simulator(x) for x in X], dtype=float)


def toy_min(x) -> float:
    """min(x1 - x2, x1 + x2)."""
    x = np.asarray(x, dtype=float)
    return float(min(x[0] - x[1], x[0] + x[1]))


def _toy_min_batch(X):
    return np.minimum(X[:, 0] - X[:, 1], X[:, 0] + X[:, 1])


def toy_min_reference(y):
    """Closed-form CDF/CCDF/PDF of min(X1 - X2, X1 + X2), X ~ N(0, I)."""
    y = np.asarray(y, dtype=float)
    u = std_normal_cdf(y / math.sqrt(2.0))
    cdf = u * (2.0 - u)
    pdf = math.sqrt(2.0) * std_normal_pdf(y / math.sqrt(2.0)) * (1.0 - u)
    out = (cdf, 1.0 - cdf, pdf)
    if np.ndim(y) == 0:
        return tuple(float(v) for v in out)
    return out


def ishigami(x) -> float:
    """sin(x1) + 7 sin^2(x2) + 0.1 x3^4 sin(x1)."""
    x = np.asarray(x, dtype=float)
    return float(
        math.sin(x[0]) + 7.0 * math.sin(x[1]) ** 2
        + 0.1 * x[2] ** 4 * math.sin(x[0])
    )


def _ishigami_batch(X):
    return (np.sin(X[:, 0]) + 7.0 * np.sin(X[:, 1]) ** 2
            + 0.1 * X[:, 2] ** 4 * np.sin(X[:, 0]))


def oscillator(x) -> float:
    """Pulse-loaded nonlinear oscillator performance function.

    Inputs (m, k1, k2, r, F1, t1); requires positive mass and stiffness sum.
    """
    m, k1, k2, r, F1, t1 = np.asarray(x, dtype=float)
    if m <= 0.0 or k1 + k2 <= 0.0:
        raise ValueError("oscillator requires m > 0 and k1 + k2 > 0")
    omega = math.sqrt((k1 + k2) / m)
    return float(3.0 * r - abs(2.0 * F1 / (k1 + k2) * math.sin(0.5 * t1 * omega)))


def _oscillator_batch(X):
    m, k1, k2, r, F1, t1 = (X[:, j] for j in range(6))
    if np.any(m <= 0.0) or np.any(k1 + k2 <= 0.0):
        raise ValueError("oscillator requires m > 0 and k1 + k2 > 0")
    omega = np.sqrt((k1 + k2) / m)
    return 3.0 * r - np.abs(2.0 * F1 / (k1 + k2) * np.sin(0.5 * t1 * omega))


_REGISTRY = {
    "toy_min": ProblemSpec(
        "toy_min", 2,
        (normal(0.0, 1.0), normal(0.0, 1.0)),
        toy_min, _toy_min_batch, toy_min_reference,
    ),
    "ishigami": ProblemSpec(
        "ishigami", 3,
        (uniform(-math.pi, math.pi),) * 3,
        ishigami, _ishigami_batch,
    ),
    "oscillator": ProblemSpec(
        "oscillator", 6,
        (normal(1.0, 0.05), normal(1.0, 0.10), normal(0.2, 0.01),
         normal(0.5, 0.05), normal(1.0, 0.20), normal(1.0, 0.20)),
        oscillator, _oscillator_batch,
    ),
}


def registered_problems():
    return sorted(_REGISTRY)


def get_problem(name: str) -> ProblemSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; registered: {', '.join(registered_problems())}"
        ) from None


def mcs_reference(problem: ProblemSpec, n_samples: int, seed: int,
                  grid: np.ndarray | None = None):
    """Empirical CDF/CCDF and histogram PDF from plain Monte Carlo.

    Returns (grid, cdf, ccdf, pdf, stderr) where stderr is the per-point
    binomial standard error of the CDF estimate. Only sensible for cheap
    closed-form simulators.
    """
    rng = np.random.default_rng(seed)
    U = rng.random((n_samples, problem.dimension))
    U = np.clip(U, 1e-12, 1.0 - 1e-12)
    X = np.empty_like(U)
    for j, m in enumerate(problem.marginals):
        X[:, j] = m.inverse_cdf(U[:, j])
    Y = problem.evaluate_batch(X)
    Y_sorted = np.sort(Y)
    if grid is None:
        lo, hi = Y_sorted[0], Y_sorted[-1]
        pad = 0.01 * (hi - lo) if hi > lo else 1.0
        grid = np.linspace(lo - pad, hi + pad, 201)
    grid = np.asarray(grid, dtype=float)
    cdf = np.searchsorted(Y_sorted, grid, side="right") / n_samples
    stderr = np.sqrt(np.maximum(cdf * (1.0 - cdf), 0.0) / n_samples)
    # centered-difference histogram density on the grid
    if grid.size >= 2:
        half = 0.5 * (grid[1] - grid[0])
        hi_counts = np.searchsorted(Y_sorted, grid + half, side="right")
        lo_counts = np.searchsorted(Y_sorted, grid - half, side="right")
        pdf = (hi_counts - lo_counts) / (n_samples * 2.0 * half)
    else:
        pdf = np.zeros_like(grid)
    return grid, cdf, 1.0 - cdf, pdf, stderr


class ExternalSimulator:
    """Adapter speaking the line-delimited subprocess protocol."""

    def __init__(self, command, dimension: int):
        self.command = list(command) if isinstance(command, (list, tuple)) else [command]
        self.dimension = dimension
        self._proc = None

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dimension:
            raise ValueError(f"expected {self.dimension} inputs, got {x.size}")
        self._ensure()
        line = " ".join(format(v, ".17g") for v in x)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise RuntimeError("external simulator pipe failed") from exc
        if not reply:
            code = self._proc.poll()
            raise RuntimeError(
                f"external simulator produced no reply (exit code {code})"
            )
        try:
            return float(reply.strip())
        except ValueError:
            raise RuntimeError(
                f"external simulator protocol violation: malformed reply {reply!r}"
            ) from None

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None


def external_problem(command, marginals) -> ProblemSpec:
    """Wrap an external subprocess simulator as a ProblemSpec."""
    sim = ExternalSimulator(command, len(marginals))
    return ProblemSpec("external", len(marginals), tuple(marginals), sim)
