"""Normal special functions and the marginal input-distribution family.

Provides the univariate standard normal CDF/PDF/quantile, a bivariate
normal CDF, and the three marginal distribution kinds (normal, lognormal,
uniform) used to describe independent random inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_inverse_cdf",
    "bivariate_normal_cdf",
    "Marginal",
    "normal",
    "lognormal",
    "uniform",
    "marginal_cdf",
    "marginal_pdf",
    "marginal_inverse_cdf",
    "joint_pdf",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def std_normal_cdf(z):
    """Standard normal CDF, vectorized; saturates to 0/1 in extreme tails."""
    return ndtr(z)


def std_normal_pdf(z):
    """Standard normal density (2*pi)^(-1/2) * exp(-z^2/2), vectorized."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / _SQRT_2PI
    return out if out.ndim else float(out)


def std_normal_inverse_cdf(p):
    """Standard normal quantile function. Rejects p outside (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("probability must lie strictly inside (0, 1)")
    out = ndtri(p_arr)
    return out if out.ndim else float(out)


# Gauss-Legendre half-weights/nodes for the correlation-integral quadrature
# (6/12/20 points depending on |rho|).
_GL6_W = (0.1713244923791704, 0.3607615730481386, 0.4679139345726910)
_GL6_X = (0.9324695142031521, 0.6612093864662645, 0.2386191860831969)
_GL12_W = (
    0.04717533638651183, 0.1069393259953184, 0.1600783285433462,
    0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
)
_GL12_X = (
    0.9815606342467192, 0.9041172563704749, 0.7699026741943047,
    0.5873179542866175, 0.3678314989981802, 0.1252334085114689,
)
_GL20_W = (
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
)
_GL20_X = (
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
    0.07652652113349733,
)


def _bvnu(dh: float, dk: float, r: float) -> float:
    """Upper-orthant probability P(Z1 > dh, Z2 > dk) for correlation r.

    Drezner-Wesolowsky style Gauss-Legendre quadrature over the
    correlation parameter, with the Genz reformulation for |r| near 1.
    """
    if math.isinf(dh) or math.isinf(dk):
        if dh == math.inf or dk == math.inf:
            return 0.0
        if dh == -math.inf:
            return 1.0 if dk == -math.inf else float(ndtr(-dk))
        return float(ndtr(-dh))
    if r == 0.0:
        return float(ndtr(-dh) * ndtr(-dk))

    if abs(r) < 0.3:
        w, x = _GL6_W, _GL6_X
    elif abs(r) < 0.75:
        w, x = _GL12_W, _GL12_X
    else:
        w, x = _GL20_W, _GL20_X

    tp = 2.0 * math.pi
    h, k = dh, dk
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        for wi, xi in zip(w, x):
            for sn in (math.sin(asr * (1.0 - xi)), math.sin(asr * (1.0 + xi))):
                bvn += wi * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / tp + float(ndtr(-h) * ndtr(-k))
        return bvn

    if r < 0.0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -0.5 * (bs / as_ + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (
                1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0
                + c * d * as_ * as_ / 5.0
            )
        if -hk < 100.0:
            b = math.sqrt(bs)
            sp = math.sqrt(tp) * float(ndtr(-b / a))
            bvn -= math.exp(-0.5 * hk) * sp * b * (
                1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0
            )
        a *= 0.5
        for wi, xi in zip(w, x):
            for xs in ((a * (1.0 - xi)) ** 2, (a * (1.0 + xi)) ** 2):
                rs = math.sqrt(1.0 - xs)
                asr = -0.5 * (bs / xs + hk)
                if asr > -100.0:
                    sp = 1.0 + c * xs * (1.0 + d * xs)
                    ep = math.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                    bvn += a * wi * math.exp(asr) * (ep - sp)
        bvn = -bvn / tp
    if r > 0.0:
        bvn += float(ndtr(-max(h, k)))
    else:
        bvn = -bvn
        if k > h:
            bvn += float(ndtr(k) - ndtr(h))
    return bvn


def bivariate_normal_cdf(a: float, b: float, rho: float) -> float:
    """P(Z1 <= a, Z2 <= b) for a standard bivariate normal, correlation rho.

    Absolute accuracy is well below 1e-8 over the whole parameter range.
    Rejects |rho| > 1.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    if rho == 1.0:
        return float(ndtr(min(a, b)))
    if rho == -1.0:
        return max(0.0, float(ndtr(a) + ndtr(b)) - 1.0)
    p = _bvnu(-a, -b, rho)
    return min(1.0, max(0.0, p))


_KINDS = ("normal", "lognormal", "uniform")


@dataclass(frozen=True)
class Marginal:
    """One independent input marginal.

    kind/param semantics:
      normal    -- param1 = mean, param2 = standard deviation
      lognormal -- param1 = mean, param2 = coefficient of variation
      uniform   -- param1 = lower bound, param2 = upper bound
    """

    kind: str
    param1: float
    param2: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "uniform":
            if not self.param1 < self.param2:
                raise ValueError("uniform marginal requires lower < upper")
        elif not self.param2 > 0.0:
            raise ValueError(f"{self.kind} marginal requires param2 > 0")
        if self.kind == "lognormal" and not self.param1 > 0.0:
            raise ValueError("lognormal marginal requires a positive mean")

    def _log_params(self):
        # (mean m, CoV v) -> log-space (mu, sigma)
        var_log = math.log1p(self.param2 ** 2)
        sigma = math.sqrt(var_log)
        mu = math.log(self.param1) - 0.5 * var_log
        return mu, sigma

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            out = ndtr((x - self.param1) / self.param2)
        elif self.kind == "lognormal":
            mu, sigma = self._log_params()
            out = np.where(x > 0.0, ndtr((np.log(np.maximum(x, 1e-300)) - mu) / sigma), 0.0)
        else:
            out = np.clip((x - self.param1) / (self.param2 - self.param1), 0.0, 1.0)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            out = std_normal_pdf((x - self.param1) / self.param2) / self.param2
        elif self.kind == "lognormal":
            mu, sigma = self._log_params()
            safe = np.maximum(x, 1e-300)
            out = np.where(
                x > 0.0,
                std_normal_pdf((np.log(safe) - mu) / sigma) / (safe * sigma),
                0.0,
            )
        else:
            inside = (x >= self.param1) & (x <= self.param2)
            out = np.where(inside, 1.0 / (self.param2 - self.param1), 0.0)
        return out if np.ndim(out) else float(out)

    def inverse_cdf(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
            raise ValueError("probability must lie strictly inside (0, 1)")
        if self.kind == "normal":
            out = self.param1 + self.param2 * ndtri(p_arr)
        elif self.kind == "lognormal":
            mu, sigma = self._log_params()
            out = np.exp(mu + sigma * ndtri(p_arr))
        else:
            out = self.param1 + (self.param2 - self.param1) * p_arr
        return out if np.ndim(out) else float(out)


def normal(mean: float, std: float) -> Marginal:
    return Marginal("normal", mean, std)


def lognormal(mean: float, cov: float) -> Marginal:
    return Marginal("lognormal", mean, cov)


def uniform(lower: float, upper: float) -> Marginal:
    return Marginal("uniform", lower, upper)


def marginal_cdf(m: Marginal, x):
    return m.cdf(x)


def marginal_pdf(m: Marginal, x):
    return m.pdf(x)


def marginal_inverse_cdf(m: Marginal, p):
    return m.inverse_cdf(p)


def joint_pdf(marginals, X):
    """Product of marginal densities over the rows of an n-by-d matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(marginals):
        raise ValueError("column count does not match number of marginals")
    out = np.ones(X.shape[0])
    for j, m in enumerate(marginals):
        out *= m.pdf(X[:, j])
    return out
