"""Scalar numba kernels shared by the samplers.

Everything here works on plain floats and a ``numpy.random.Generator`` passed
in explicitly, so jitted code draws from the caller's stream.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)
HALF_LOG_2PI = 0.5 * LOG_2PI


@njit(cache=True)
def log_upper_tail(x):
    """log P(Z > x) for Z ~ N(0, 1), accurate in both tails."""
    if x < 8.0:
        return math.log(0.5 * math.erfc(x / SQRT2))
    # Mills ratio by backward continued fraction
    f = x
    for k in range(60, 0, -1):
        f = x + k / f
    return -0.5 * x * x - HALF_LOG_2PI - math.log(f)


@njit(cache=True)
def log_ndtr(x):
    return log_upper_tail(-x)


@njit(cache=True)
def ndtr(x):
    return 0.5 * math.erfc(-x / SQRT2)


@njit(cache=True)
def ln_npr(a, b):
    """log P(a < Z < b) for Z ~ N(0, 1), avoiding cancellation."""
    if a > 0.0:
        pa = log_upper_tail(a)
        pb = log_upper_tail(b)
        return pa + math.log1p(-math.exp(pb - pa))
    if b < 0.0:
        pa = log_upper_tail(-a)
        pb = log_upper_tail(-b)
        return pb + math.log1p(-math.exp(pa - pb))
    pa = 0.5 * math.erfc(-a / SQRT2)
    pb = 0.5 * math.erfc(b / SQRT2)
    return math.log1p(-pa - pb)


@njit(cache=True)
def norm_ppf(p):
    """Inverse standard normal CDF: rational start plus one Halley step."""
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley refinement against the tail that keeps relative precision
    if x < 0.0:
        e = 0.5 * math.erfc(-x / SQRT2) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / SQRT2)
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@njit(cache=True)
def _ntail(l, u, rng):
    # Rayleigh proposal for l > 0 (Marsaglia-style tail sampler)
    c = 0.5 * l * l
    f = math.expm1(c - 0.5 * u * u)
    while True:
        x = c - math.log1p(rng.random() * f)
        v = rng.random()
        if v * v * x <= c:
            return math.sqrt(2.0 * x)


@njit(cache=True)
def _tn_central(l, u, rng):
    if u - l > 2.0:
        while True:
            x = rng.standard_normal()
            if l <= x <= u:
                return x
    pl = 0.5 * math.erfc(-l / SQRT2)
    pu = 0.5 * math.erfc(-u / SQRT2)
    x = norm_ppf(pl + (pu - pl) * rng.random())
    if x < l:
        return l
    if x > u:
        return u
    return x


@njit(cache=True)
def trandn(l, u, rng):
    """One draw of N(0, 1) truncated to [l, u]."""
    if l > 0.66:
        return _ntail(l, u, rng)
    if u < -0.66:
        return -_ntail(-u, -l, rng)
    return _tn_central(l, u, rng)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
