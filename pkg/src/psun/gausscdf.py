"""Deterministic Gaussian orthant probabilities in low dimension.

``log P(X <= x)`` for ``X ~ N(0, cov)`` is computed exactly for up to three
dimensions: the bivariate case through Owen's T function and the trivariate
case by one-dimensional quadrature of a conditional bivariate probability.
Components with ``x = +inf`` are marginalised out first.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

EXACT_MAX_DIM = 3


def _bvn_cdf(h: float, k: float, rho: float) -> float:
    if h == -np.inf or k == -np.inf:
        return 0.0
    if h == np.inf:
        return float(special.ndtr(k))
    if k == np.inf:
        return float(special.ndtr(h))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(rho) / (2.0 * math.pi)
    s = math.sqrt(max(1.0 - rho * rho, 0.0))
    if s == 0.0:
        if rho > 0:
            return float(special.ndtr(min(h, k)))
        return max(0.0, float(special.ndtr(h) - special.ndtr(-k)))

    def t_term(a_, b_):
        if a_ == 0.0:
            return math.copysign(0.25, b_ - rho * a_)
        # a tiny a_ sends the slope to +-inf, where T(a, inf) is still finite
        with np.errstate(over="ignore"):
            return float(special.owens_t(a_, np.float64(b_ - rho * a_) / (a_ * s)))

    c = 0.0 if (h * k > 0 or (h * k == 0 and h + k >= 0)) else 0.5
    p = 0.5 * (special.ndtr(h) + special.ndtr(k)) - t_term(h, k) - t_term(k, h) - c
    if p < 1e-6:
        # Owen's formula cancels in the far tail; quadrature keeps relative accuracy
        lo_, hi_ = (h, k) if h <= k else (k, h)

        def f(t):
            return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) * special.ndtr(
                (hi_ - rho * t) / s)

        p, _ = integrate.quad(f, -np.inf, lo_, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(min(max(p, 0.0), 1.0))


def _tvn_cdf(h: np.ndarray, r: np.ndarray) -> float:
    r12, r13, r23 = r[0, 1], r[0, 2], r[1, 2]
    s12 = math.sqrt(1.0 - r12 * r12)
    s13 = math.sqrt(1.0 - r13 * r13)
    rho = (r23 - r12 * r13) / (s12 * s13)
    rho = min(max(rho, -1.0), 1.0)

    def integrand(t):
        return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) * _bvn_cdf(
            (h[1] - r12 * t) / s12, (h[2] - r13 * t) / s13, rho)

    lo = -40.0
    hi = min(float(h[0]), 40.0)
    if hi <= lo:
        return 0.0
    # split at the conditional kinks so quad sees smooth pieces
    pts = [p for p in (0.0, h[1] / r12 if r12 else None, h[2] / r13 if r13 else None)
           if p is not None and lo < p < hi]
    val, _ = integrate.quad(integrand, lo, hi, points=sorted(set(pts)) or None,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return float(min(max(val, 0.0), 1.0))


def log_mvn_cdf_exact(x, cov) -> float:
    """``log P(X <= x)``, ``X ~ N(0, cov)``, for at most three finite bounds."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if np.any(x == -np.inf):
        return -math.inf
    keep = np.isfinite(x)
    x = x[keep]
    cov = cov[np.ix_(keep, keep)]
    k = x.size
    if k == 0:
        return 0.0
    if k > EXACT_MAX_DIM:
        raise ValueError(f"exact evaluation supports at most {EXACT_MAX_DIM} dimensions")
    sd = np.sqrt(np.diag(cov))
    h = x / sd
    r = cov / np.outer(sd, sd)
    if k == 1:
        return float(special.log_ndtr(h[0]))
    if np.allclose(r, np.eye(k), atol=0.0, rtol=0.0):
        return float(np.sum(special.log_ndtr(h)))
    if k == 2:
        p = _bvn_cdf(h[0], h[1], float(np.clip(r[0, 1], -1.0, 1.0)))
    else:
        # integrate over the variable with the smallest marginal probability
        order = np.argsort(h)
        p = _tvn_cdf(h[order], r[np.ix_(order, order)])
    return math.log(p) if p > 0 else -math.inf
