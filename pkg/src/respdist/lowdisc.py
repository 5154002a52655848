"""Low-discrepancy point sets and mappings into the input space.

Sobol points (for the fixed Monte Carlo integration pool) come from
scipy's generator, which uses the Joe-Kuo direction numbers. Hammersley
points (for the initial design) are built here from the radical-inverse
construction: first coordinate i/n, remaining coordinates van der Corput
in successive prime bases starting at 2.

Supported dimension is capped at 64. Scrambling is off by default so a
fixed spec always yields a bit-identical point set; an optional
scramble_seed enables Owen scrambling (Sobol) or a Cranley-Patterson
rotation (Hammersley) for run-to-run robustness studies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

__all__ = [
    "SequenceSpec",
    "generate_unit_points",
    "map_to_distribution",
    "map_to_box",
    "MAX_DIMENSION",
]

MAX_DIMENSION = 64

_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61,
    67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137,
    139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211,
    223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283,
    293, 307,
)

_UNIT_EPS = 1e-12


@dataclass(frozen=True)
class SequenceSpec:
    kind: str  # "sobol" or "hammersley"
    dimension: int
    count: int
    scramble_seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("sobol", "hammersley"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}]")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(len(indices), dtype=float)
    denom = np.ones(len(indices), dtype=float)
    idx = indices.copy()
    while np.any(idx > 0):
        denom *= base
        out += (idx % base) / denom
        idx //= base
    return out


def _hammersley(n: int, d: int, scramble_seed: int | None) -> np.ndarray:
    pts = np.empty((n, d), dtype=float)
    pts[:, 0] = np.arange(n, dtype=float) / n
    indices = np.arange(n, dtype=np.int64)
    for j in range(1, d):
        pts[:, j] = _radical_inverse(indices, _PRIMES[j - 1])
    if scramble_seed is not None:
        shift = np.random.default_rng(scramble_seed).random(d)
        pts = np.mod(pts + shift, 1.0)
    return pts


def generate_unit_points(spec: SequenceSpec) -> np.ndarray:
    """Emit a count-by-dimension matrix of points in [0, 1)^d.

    Deterministic for a fixed spec (including scramble_seed).
    """
    if spec.kind == "hammersley":
        return _hammersley(spec.count, spec.dimension, spec.scramble_seed)
    with warnings.catch_warnings():
        # scipy warns when count is not a power of two; balance is not
        # required here, the pool size is caller-chosen.
        warnings.simplefilter("ignore", UserWarning)
        engine = qmc.Sobol(
            d=spec.dimension,
            scramble=spec.scramble_seed is not None,
            seed=spec.scramble_seed,
        )
        pts = engine.random(spec.count)
    # scrambled points can round to 1.0; keep the half-open range contract
    return np.clip(pts, 0.0, 1.0 - 1e-16)


def map_to_distribution(points: np.ndarray, marginals) -> np.ndarray:
    """Push unit-cube points through the marginal quantile functions.

    Coordinates of exactly 0 or 1 are nudged inward by 1e-12 before the
    inverse CDF is applied.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != len(marginals):
        raise ValueError("column count does not match number of marginals")
    u = np.clip(points, _UNIT_EPS, 1.0 - _UNIT_EPS)
    out = np.empty_like(u)
    for j, m in enumerate(marginals):
        out[:, j] = m.inverse_cdf(u[:, j])
    return out


def map_to_box(points: np.ndarray, lower, upper) -> np.ndarray:
    """Affine rescale of unit-cube points into the box [lower, upper]."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower >= upper):
        raise ValueError("box requires lower < upper in every dimension")
    if points.shape[1] != lower.size:
        raise ValueError("column count does not match box dimension")
    return lower + points * (upper - lower)
