"""Exact Gaussian-process regression with a constant mean and Gaussian kernel.

The surrogate interpolates noise-free observations. Hyperparameters are
estimated by multi-start quasi-Newton maximization of the log marginal
likelihood over log(sigma0) and log(lengthscales), with the constant mean
profiled out in closed form at every evaluation. Inputs and outputs are
standardized internally; predictions are returned in the original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

__all__ = ["Hyperparams", "FitConfig", "FitError", "GPModel",
           "kernel", "log_marginal_likelihood", "fit", "predict"]


class FitError(RuntimeError):
    """Raised when no restart produces a usable factorization."""


@dataclass(frozen=True)
class Hyperparams:
    beta: float
    sigma0: float
    lengthscales: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "lengthscales",
            np.atleast_1d(np.asarray(self.lengthscales, dtype=float)),
        )
        if not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")
        if not np.all(self.lengthscales > 0.0):
            raise ValueError("lengthscales must be positive")


@dataclass
class FitConfig:
    restarts: int = 5
    maxiter: int = 200
    jitter_initial: float = 1e-10  # relative to sigma0^2
    jitter_max: float = 1e-4
    seed: int | None = None
    # optional extra start at known-good hyperparameters (original units);
    # keeps successive refits on growing designs in the same likelihood basin
    warm_start: Hyperparams | None = None


def kernel(x, xp, hyper: Hyperparams) -> float:
    """Anisotropic Gaussian kernel sigma0^2 * exp(-1/2 sum (dx_r/l_r)^2)."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    d2 = np.sum(((x - xp) / hyper.lengthscales) ** 2)
    return hyper.sigma0 ** 2 * float(np.exp(-0.5 * d2))


def _kernel_matrix(A, B, sigma0, lengthscales):
    d2 = cdist(A / lengthscales, B / lengthscales, "sqeuclidean")
    return sigma0 ** 2 * np.exp(-0.5 * d2)


def log_marginal_likelihood(hyper: Hyperparams, X, Y, jitter: float = 0.0) -> float:
    """-1/2 [(Y-b)' K^-1 (Y-b) + log|K| + n log 2pi] via Cholesky."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    n = len(Y)
    K = _kernel_matrix(X, X, hyper.sigma0, hyper.lengthscales)
    if jitter:
        K[np.diag_indices_from(K)] += jitter
    L = np.linalg.cholesky(K)
    r = Y - hyper.beta
    v = solve_triangular(L, r, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (v @ v + logdet + n * np.log(2.0 * np.pi))


def _profiled_nll_and_grad(theta, X, Y, sq_dists, jitter_rel, jitter_max):
    """Negative LML (beta profiled out by GLS) and its gradient in log space.

    theta = [log sigma0, log l_1, ..., log l_d]. Returns a large finite
    value when the kernel matrix cannot be factorized at any jitter level.
    """
    n, d = X.shape
    sigma0 = np.exp(theta[0])
    ls = np.exp(theta[1:])
    # correlation matrix from per-dimension squared distances
    expo = np.zeros((n, n))
    for m in range(d):
        expo += sq_dists[m] / ls[m] ** 2
    R = np.exp(-0.5 * expo)
    jit = jitter_rel
    while True:
        C = R.copy()
        C[np.diag_indices_from(C)] += jit
        try:
            Lc = np.linalg.cholesky(C)
            break
        except np.linalg.LinAlgError:
            jit *= 10.0
            if jit > jitter_max:
                return 1e25, np.zeros_like(theta)
    K_chol = sigma0 * Lc  # Cholesky factor of K = sigma0^2 (R + jit I)

    ones = np.ones(n)
    vy = solve_triangular(K_chol, Y, lower=True)
    v1 = solve_triangular(K_chol, ones, lower=True)
    beta = (v1 @ vy) / (v1 @ v1)
    vr = vy - beta * v1
    logdet = 2.0 * np.sum(np.log(np.diag(K_chol)))
    nll = 0.5 * (vr @ vr + logdet + n * np.log(2.0 * np.pi))

    # gradient: dLML/dtheta_k = 1/2 a' dK a - 1/2 tr(K^-1 dK), a = K^-1 r
    alpha = solve_triangular(K_chol, vr, lower=True, trans="T")
    Kinv = cho_solve((K_chol, True), np.eye(n))
    grad = np.empty_like(theta)
    # dK/dlog sigma0 = 2K:  a'Ka = r'a,  tr(K^-1 2K) = 2n
    grad[0] = -(alpha @ (Y - beta) - n)
    for m in range(d):
        dK = (sigma0 ** 2 * R) * (sq_dists[m] / ls[m] ** 2)
        grad[1 + m] = -0.5 * (alpha @ dK @ alpha - np.sum(Kinv * dK))
    return nll, grad


class GPModel:
    """Trained surrogate; immutable after construction, safe for concurrent predict."""

    def __init__(self, X, Y, hyper, jitter, x_shift, x_scale, y_shift, y_scale,
                 constant=None):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.Y = np.asarray(Y, dtype=float).ravel()
        self.hyper = hyper  # in standardized space
        self.jitter = jitter
        self.x_shift = np.asarray(x_shift, dtype=float)
        self.x_scale = np.asarray(x_scale, dtype=float)
        self.y_shift = float(y_shift)
        self.y_scale = float(y_scale)
        self.constant = constant  # degenerate constant-response model
        if constant is None:
            self.Xs = (self.X - self.x_shift) / self.x_scale
            K = _kernel_matrix(self.Xs, self.Xs, hyper.sigma0, hyper.lengthscales)
            K[np.diag_indices_from(K)] += jitter
            self.chol = np.linalg.cholesky(K)
            Ys = (self.Y - self.y_shift) / self.y_scale
            self.alpha = cho_solve((self.chol, True), Ys - hyper.beta)
        else:
            self.Xs = (self.X - self.x_shift) / self.x_scale
            self.chol = None
            self.alpha = None

    @classmethod
    def from_hyper(cls, X, Y, hyper: Hyperparams, jitter: float = 0.0):
        """Build a model at fixed hyperparameters without standardization."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = X.shape[1]
        return cls(X, Y, hyper, jitter,
                   np.zeros(d), np.ones(d), 0.0, 1.0)

    @property
    def raw_hyper(self) -> Hyperparams | None:
        """Hyperparameters expressed in the original (unstandardized) units."""
        if self.constant is not None:
            return None
        return Hyperparams(
            self.y_shift + self.y_scale * self.hyper.beta,
            self.y_scale * self.hyper.sigma0,
            self.hyper.lengthscales * self.x_scale,
        )

    @property
    def prior_mean(self) -> float:
        if self.constant is not None:
            return self.constant
        return self.y_shift + self.y_scale * self.hyper.beta

    @property
    def prior_std(self) -> float:
        if self.constant is not None:
            return 0.0
        return self.y_scale * self.hyper.sigma0

    def predict(self, Xq, chunk: int = 20000):
        """Posterior mean and standard deviation at query rows, original units."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        m = Xq.shape[0]
        if self.constant is not None:
            return np.full(m, self.constant), np.zeros(m)
        hyper = self.hyper
        mean = np.empty(m)
        var = np.empty(m)
        Xqs = (Xq - self.x_shift) / self.x_scale
        for s in range(0, m, chunk):
            blk = Xqs[s:s + chunk]
            Ks = _kernel_matrix(blk, self.Xs, hyper.sigma0, hyper.lengthscales)
            mean[s:s + chunk] = hyper.beta + Ks @ self.alpha
            v = solve_triangular(self.chol, Ks.T, lower=True)
            var[s:s + chunk] = hyper.sigma0 ** 2 - np.sum(v * v, axis=0)
        np.maximum(var, 0.0, out=var)
        return (self.y_shift + self.y_scale * mean,
                self.y_scale * np.sqrt(var))

    def posterior_cov(self, x, xp) -> float:
        """Posterior covariance k_n(x, x') in original units."""
        if self.constant is not None:
            return 0.0
        hyper = self.hyper
        xs = (np.asarray(x, dtype=float) - self.x_shift) / self.x_scale
        xps = (np.asarray(xp, dtype=float) - self.x_shift) / self.x_scale
        kx = _kernel_matrix(xs[None, :], self.Xs, hyper.sigma0, hyper.lengthscales)
        kxp = _kernel_matrix(xps[None, :], self.Xs, hyper.sigma0, hyper.lengthscales)
        vx = solve_triangular(self.chol, kx.ravel(), lower=True)
        vxp = solve_triangular(self.chol, kxp.ravel(), lower=True)
        k0 = hyper.sigma0 ** 2 * np.exp(-0.5 * np.sum(((xs - xps) / hyper.lengthscales) ** 2))
        return self.y_scale ** 2 * float(k0 - vx @ vxp)


def fit(X, Y, cfg: FitConfig | None = None) -> GPModel:
    """Fit the surrogate by multi-start maximization of the marginal likelihood."""
    cfg = cfg or FitConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two observations to fit")
    if len(Y) != n:
        raise ValueError("X and Y row counts differ")

    x_shift = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale < 1e-300] = 1.0
    Xs = (X - x_shift) / x_scale
    if n > 1 and pdist(Xs).min() < 1e-12:
        raise ValueError("design rows must be pairwise distinct")

    y_shift = Y.mean()
    y_scale = Y.std()
    if y_scale < 1e-15 * max(1.0, abs(y_shift)):
        # constant responses: no signal to fit, predictions revert to the constant
        hyper = Hyperparams(0.0, 1.0, np.ones(d))
        return GPModel(X, Y, hyper, 0.0, x_shift, x_scale, y_shift, 1.0,
                       constant=y_shift)
    Ys = (Y - y_shift) / y_scale

    sq_dists = [cdist(Xs[:, [m]], Xs[:, [m]], "sqeuclidean") for m in range(d)]
    ranges = Xs.max(axis=0) - Xs.min(axis=0)
    ranges[ranges < 1e-12] = 1.0

    rng = np.random.default_rng(cfg.seed)
    bounds = [(np.log(1e-3), np.log(1e3))] + [
        (np.log(1e-3 * r), np.log(1e3 * r)) for r in ranges
    ]
    starts = [(1.0, ranges.copy())]
    if cfg.warm_start is not None:
        starts.append((
            max(cfg.warm_start.sigma0 / y_scale, 1e-300),
            np.maximum(cfg.warm_start.lengthscales / x_scale, 1e-300),
        ))
    while len(starts) < cfg.restarts + (cfg.warm_start is not None):
        starts.append((
            float(np.exp(rng.uniform(-0.5, 0.5))),
            ranges * 10.0 ** rng.uniform(-1.0, 1.0, size=d),
        ))

    def _optimize(sig0, ls0):
        theta0 = np.log(np.concatenate(([sig0], ls0)))
        theta0 = np.clip(theta0, [b[0] for b in bounds], [b[1] for b in bounds])
        return minimize(
            _profiled_nll_and_grad, theta0,
            args=(Xs, Ys, sq_dists, cfg.jitter_initial, cfg.jitter_max),
            method="L-BFGS-B", jac=True, bounds=bounds,
            options={"maxiter": cfg.maxiter, "gtol": 1e-5, "ftol": 1e-9},
        )

    best = None
    for sig0, ls0 in starts:
        res = _optimize(sig0, ls0)
        if res.fun < 1e24 and (best is None or res.fun < best.fun):
            best = res
    # The zero-lengthscale "memorization" optimum (K -> sigma0^2 I) is a wide
    # attractor whose NLL equals the white-noise plateau. If no start beat it,
    # retry with fresh anisotropy draws before accepting the degenerate model.
    white_noise_nll = 0.5 * n * (1.0 + np.log(2.0 * np.pi))
    retries = 0
    while (best is not None and best.fun >= white_noise_nll - 1e-9
           and retries < 3):
        retries += 1
        for _ in range(cfg.restarts):
            res = _optimize(
                float(np.exp(rng.uniform(-0.5, 0.5))),
                ranges * 10.0 ** rng.uniform(-1.0, 1.0, size=d),
            )
            if res.fun < 1e24 and res.fun < best.fun:
                best = res
        if best.fun < white_noise_nll - 1e-9:
            break
    if best is None:
        raise FitError(
            f"all {cfg.restarts} restarts failed to factorize the kernel matrix "
            f"(n={n}, d={d})"
        )

    sigma0 = float(np.exp(best.x[0]))
    ls = np.exp(best.x[1:])
    # recover profiled beta and the jitter level actually needed
    jit = cfg.jitter_initial
    while True:
        K = _kernel_matrix(Xs, Xs, sigma0, ls)
        K[np.diag_indices_from(K)] += jit * sigma0 ** 2
        try:
            L = np.linalg.cholesky(K)
            break
        except np.linalg.LinAlgError:
            jit *= 10.0
            if jit > cfg.jitter_max:
                raise FitError("kernel matrix not factorizable at optimum")
    ones = np.ones(n)
    vy = solve_triangular(L, Ys, lower=True)
    v1 = solve_triangular(L, ones, lower=True)
    beta = float((v1 @ vy) / (v1 @ v1))
    hyper = Hyperparams(beta, sigma0, ls)
    return GPModel(X, Y, hyper, jit * sigma0 ** 2, x_shift, x_scale,
                   y_shift, y_scale)


def predict(model: GPModel, Xq):
    return model.predict(Xq)
