"""Logistic-Kolmogorov mixing law.

If ``V0`` follows the Kolmogorov distribution then ``V = 4 * V0**2`` mixes a
centred Gaussian variance into the standard logistic law:
``T | V ~ N(0, V)`` gives ``T ~ Logistic(0, 1)``. This module evaluates the
density and CDF of ``V`` and draws from both ``V`` and ``V | T = t``.

The conditional sampler is an accept-reject scheme whose proposal is the
inverse-gamma posterior ``IG(alpha + 1/2, gamma + t**2 / 2)`` with
``gamma = pi**2 / 2`` and ``alpha`` picked from a fixed schedule in ``|t|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._numerics import HALF_LOG_2PI, as_generator

V_STAR = 1.9834
GAMMA = math.pi ** 2 / 2.0
SERIES_TOL = 1e-15
MAX_TERMS = 100
MAX_TRIALS = 1_000_000

_PI2 = math.pi ** 2
_LOG_GAMMA = math.log(GAMMA)
# sqrt(2 pi^5), the j = 1 coefficient of the small-v branch bound
_LOG_SQRT_2PI5 = 0.5 * math.log(2.0 * math.pi ** 5)


class LkError(RuntimeError):
    """Raised when the V | T rejection loop exceeds its trial budget."""


@dataclass(frozen=True)
class LkConstants:
    v_star: float = V_STAR
    gamma: float = GAMMA
    series_tol: float = SERIES_TOL


@dataclass(frozen=True)
class RejectionProposal:
    """Inverse-gamma proposal parameters and the envelope constant."""

    alpha: float
    gamma: float
    m_star: float

    def __post_init__(self):
        if self.alpha < 1.5:
            raise ValueError("alpha must be >= 3/2")

    @classmethod
    def for_t(cls, t: float) -> "RejectionProposal":
        alpha = alpha_for_t(abs(t))
        return cls(alpha=alpha, gamma=GAMMA, m_star=m_star(alpha))


# ---------------------------------------------------------------------------
# density and CDF kernels


@njit(cache=True)
def _log_lk_small(v):
    # theta-function branch, j = 1 factored out: exp(-pi^2 / (2 v))
    s = _PI2 - v
    for j in range(2, MAX_TERMS + 1):
        k2 = (2 * j - 1) ** 2
        term = (k2 * _PI2 - v) * math.exp(-(k2 - 1) * _PI2 / (2.0 * v))
        s += term
        if term < SERIES_TOL * s:
            break
    return HALF_LOG_2PI - 2.5 * math.log(v) + math.log(s) - _PI2 / (2.0 * v)


@njit(cache=True)
def _log_lk_large(v):
    # alternating branch, j = 1 factored out: exp(-v / 2)
    s = 1.0
    sign = -1.0
    for j in range(2, MAX_TERMS + 1):
        term = j * j * math.exp(-(j * j - 1) * v / 2.0)
        s += sign * term
        sign = -sign
        if term < SERIES_TOL * abs(s):
            break
    return -0.5 * v + math.log(s)


@njit(cache=True)
def log_lk_scalar(v):
    if v <= 0.0:
        return -math.inf
    if v <= V_STAR:
        return _log_lk_small(v)
    return _log_lk_large(v)


@njit(cache=True)
def _log_lk_array(v):
    out = np.empty(v.size)
    flat = v.ravel()
    for i in range(flat.size):
        out[i] = log_lk_scalar(flat[i])
    return out


@njit(cache=True)
def kolmogorov_cdf_scalar(x):
    if x <= 0.0:
        return 0.0
    if x * x * 4.0 <= V_STAR:
        # Jacobi dual form, stable for small x
        s = 0.0
        c = _PI2 / (8.0 * x * x)
        for j in range(1, MAX_TERMS + 1):
            k2 = (2 * j - 1) ** 2
            term = math.exp(-k2 * c)
            s += term
            if term < SERIES_TOL * s:
                break
        return math.sqrt(2.0 * math.pi) / x * s
    s = 0.0
    sign = 1.0
    for j in range(1, MAX_TERMS + 1):
        term = math.exp(-2.0 * j * j * x * x)
        s += sign * term
        sign = -sign
        if term < SERIES_TOL * abs(s):
            break
    return 1.0 - 2.0 * s


@njit(cache=True)
def _lk_cdf_scalar(v):
    return kolmogorov_cdf_scalar(0.5 * math.sqrt(v)) if v > 0.0 else 0.0


@njit(cache=True)
def _lk_inverse_cdf(u, tol):
    # bisection on log v; the bracket covers probabilities down to ~1e-300
    lo = math.log(5e-3)
    hi = math.log(1.5e3)
    flo = _lk_cdf_scalar(math.exp(lo))
    fhi = _lk_cdf_scalar(math.exp(hi))
    for _ in range(100):
        if fhi - flo < tol:
            break
        mid = 0.5 * (lo + hi)
        f = _lk_cdf_scalar(math.exp(mid))
        if f < u:
            lo, flo = mid, f
        else:
            hi, fhi = mid, f
    return math.exp(0.5 * (lo + hi))


@njit(cache=True)
def _sample_lk_prior(n, rng, tol):
    out = np.empty(n)
    for i in range(n):
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        out[i] = _lk_inverse_cdf(u, tol)
    return out


# ---------------------------------------------------------------------------
# alpha schedule and envelope


@njit(cache=True)
def _alpha_for_t(a):
    if a <= 2.2878:
        return 1.99
    if a <= 3.1572:
        return 2.17
    if a <= 6.50:
        return 1.8982 + 0.0156 * a + 0.0349 * a * a
    if a <= 29.33:
        return 0.4982 + 0.4376 * a + 0.0012 * a * a
    return -0.3201 + 0.4986 * a


@njit(cache=True)
def _log_delta1(v, alpha):
    return _LOG_SQRT_2PI5 + math.lgamma(alpha) - alpha * _LOG_GAMMA + (alpha - 1.5) * math.log(v)


@njit(cache=True)
def _log_delta2(v, alpha):
    return (math.lgamma(alpha) - alpha * _LOG_GAMMA + (alpha + 1.0) * math.log(v)
            + _PI2 / (2.0 * v) - 0.5 * v)


@njit(cache=True)
def _log_m_star(alpha):
    best = max(_log_delta1(V_STAR, alpha), _log_delta2(V_STAR, alpha))
    if alpha >= math.pi - 1.0:
        root = 1.0 + alpha + math.sqrt((1.0 + alpha) ** 2 - _PI2)
        if root > V_STAR:
            best = max(best, _log_delta2(root, alpha))
    return best


@njit(cache=True)
def _log_ig_density(v, shape, scale):
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1.0) * math.log(v) - scale / v


@njit(cache=True)
def _sample_v_given_t(t, rng, max_trials):
    alpha = _alpha_for_t(abs(t))
    log_m = _log_m_star(alpha)
    shape = alpha + 0.5
    rate = GAMMA + 0.5 * t * t
    trials = 0
    while True:
        trials += 1
        if trials > max_trials:
            return -1.0, trials
        v = rate / rng.standard_gamma(shape)
        log_ratio = log_lk_scalar(v) - _log_ig_density(v, alpha, GAMMA) - log_m
        if math.log(rng.random()) <= log_ratio:
            return v, trials


@njit(cache=True)
def _sample_v_given_t_vec(t, rng, max_trials):
    out = np.empty(t.size)
    counts = np.empty(t.size, dtype=np.int64)
    for i in range(t.size):
        v, k = _sample_v_given_t(t[i], rng, max_trials)
        out[i] = v
        counts[i] = k
    return out, counts


# ---------------------------------------------------------------------------
# public API


def lk_log_density(v):
    """Log density of the logistic-Kolmogorov law, elementwise."""
    arr = np.asarray(v, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("lk density requires v > 0")
    out = _log_lk_array(np.ascontiguousarray(arr)).reshape(arr.shape)
    return out if arr.ndim else float(out)


def lk_density(v):
    """Two-branch series density of the logistic-Kolmogorov law."""
    return np.exp(lk_log_density(v))


def lk_cdf(v):
    """CDF of V, i.e. the Kolmogorov CDF at sqrt(v) / 2."""
    arr = np.asarray(v, dtype=float)
    out = np.array([_lk_cdf_scalar(x) for x in arr.ravel()]).reshape(arr.shape)
    return out if arr.ndim else float(out)


def kolmogorov_cdf(x):
    """K(x) = 1 - 2 sum (-1)^(j-1) exp(-2 j^2 x^2); zero for x <= 0."""
    arr = np.asarray(x, dtype=float)
    out = np.array([kolmogorov_cdf_scalar(e) for e in arr.ravel()]).reshape(arr.shape)
    return out if arr.ndim else float(out)


def alpha_for_t(abs_t: float) -> float:
    """Proposal shape for the V | T sampler as a function of |t|."""
    if abs_t < 0:
        raise ValueError("abs_t must be non-negative")
    return float(_alpha_for_t(float(abs_t)))


def log_m_star(alpha: float) -> float:
    if alpha < 1.5:
        raise ValueError("alpha must be >= 3/2")
    return float(_log_m_star(float(alpha)))


def m_star(alpha: float) -> float:
    """Upper bound of lk(v) / IG(v; alpha, pi^2/2) over v > 0."""
    return math.exp(log_m_star(alpha))


def envelope_terms(alpha: float) -> dict[str, float]:
    """Branch suprema and their locations, for inspection and tests."""
    if alpha < 1.5:
        raise ValueError("alpha must be >= 3/2")
    out = {
        "delta1_sup": math.exp(_log_delta1(V_STAR, alpha)),
        "delta2_at_v_star": math.exp(_log_delta2(V_STAR, alpha)),
        "delta2_argsup": V_STAR,
    }
    if alpha >= math.pi - 1.0:
        root = 1.0 + alpha + math.sqrt((1.0 + alpha) ** 2 - math.pi ** 2)
        out["delta2_argsup"] = root
    out["delta2_sup"] = math.exp(_log_delta2(out["delta2_argsup"], alpha))
    return out


def acceptance_probability(t: float) -> float:
    """Exact acceptance probability 1/M of the V | T = t sampler."""
    alpha = alpha_for_t(abs(t))
    # log f_T~(t): Student-type marginal of the inverse-gamma proposal
    log_ft_tilde = (math.lgamma(alpha + 0.5) - math.lgamma(alpha)
                    - 0.5 * math.log(2.0 * math.pi * GAMMA)
                    - (alpha + 0.5) * math.log1p(t * t / (2.0 * GAMMA)))
    a = abs(t)
    log_ft = -a - 2.0 * math.log1p(math.exp(-a))
    return math.exp(log_ft - log_m_star(alpha) - log_ft_tilde)


def sample_lk(n: int, rng, tol: float = 1e-12) -> np.ndarray:
    """Draw n prior values of V by inverse-CDF bisection."""
    rng = as_generator(rng)
    return _sample_lk_prior(int(n), rng, tol)


def sample_v_given_t(t, rng, return_trials: bool = False):
    """Exact draws of V | T = t, one per entry of ``t``."""
    rng = as_generator(rng)
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError("t must be finite")
    v, trials = _sample_v_given_t_vec(np.ascontiguousarray(arr.ravel()), rng, MAX_TRIALS)
    if np.any(v < 0):
        bad = arr.ravel()[v < 0][0]
        raise LkError(f"V | T rejection loop exceeded {MAX_TRIALS} trials at t={bad!r}")
    v = v.reshape(arr.shape)
    if np.ndim(t) == 0:
        v = float(v[0])
        trials = int(trials[0])
    if return_trials:
        return v, trials
    return v
