"""Multivariate normal laws under one-sided (upper) rectangular truncation.

Exact draws of ``X ~ N(0, Sigma) | X <= upper`` use minimax exponential
tilting: variables are reordered by truncation probability, a tilted
sequential proposal is fitted by solving a small saddle-point system, and
proposals are accepted with probability ``exp(log_w - psi_star)``, which is
exact because ``psi_star`` bounds every log-weight. The same proposal gives an
importance-sampling estimate of the region probability.

For large dimension a warm-started coordinate Gibbs kernel is provided. It
leaves the truncated law invariant but does not produce independent draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import optimize

from ._numerics import HALF_LOG_2PI, as_generator, ln_npr, trandn

LOG_PROB_FLOOR = -700.0
EXACT_MAX_DIM = 200
GIBBS_SWEEPS = 5
MAX_TRIALS = 100_000


class TmvnError(RuntimeError):
    """The truncation region is numerically empty or the tilting fit failed."""


@dataclass(frozen=True)
class TruncationSpec:
    """``N(0, sigma)`` restricted to ``x <= upper`` componentwise."""

    upper: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        k = upper.size
        if sigma.shape != (k, k):
            raise ValueError(f"sigma must be {k}x{k}, got {sigma.shape}")
        if np.any(np.isnan(upper)) or np.any(upper == -np.inf):
            raise ValueError("upper bounds must be > -inf and not NaN")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > 1e-10 * scale:
            raise ValueError("sigma must be symmetric")
        if k > 0 and np.linalg.eigvalsh(sigma)[0] < -1e-10 * scale:
            raise ValueError("sigma must be positive semi-definite")
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))

    @classmethod
    def trusted(cls, upper: np.ndarray, sigma: np.ndarray) -> "TruncationSpec":
        """Build without validation, for inputs assembled by the sampler itself."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "upper", upper)
        object.__setattr__(obj, "sigma", sigma)
        return obj

    @property
    def dim(self) -> int:
        return self.upper.size

    def jittered_sigma(self) -> np.ndarray:
        k = self.dim
        return self.sigma + np.eye(k) * (1e-10 * np.trace(self.sigma) / k)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _cholperm(sig, l, u):
    # Cholesky with variables ordered by smallest conditional truncation probability
    d = l.size
    sig = sig.copy()
    l = l.copy()
    u = u.copy()
    perm = np.arange(d)
    L = np.zeros((d, d))
    z = np.zeros(d)
    eps = 2.220446049250313e-16
    for j in range(d):
        best = np.inf
        k = j
        for i in range(j, d):
            s = sig[i, i]
            cz = 0.0
            for r in range(j):
                s -= L[i, r] * L[i, r]
                cz += L[i, r] * z[r]
            if s < eps:
                s = eps
            s = math.sqrt(s)
            pr = ln_npr((l[i] - cz) / s, (u[i] - cz) / s)
            if pr < best:
                best = pr
                k = i
        if k != j:
            for r in range(d):
                tmp = sig[j, r]
                sig[j, r] = sig[k, r]
                sig[k, r] = tmp
            for r in range(d):
                tmp = sig[r, j]
                sig[r, j] = sig[r, k]
                sig[r, k] = tmp
            for r in range(j):
                tmp = L[j, r]
                L[j, r] = L[k, r]
                L[k, r] = tmp
            l[j], l[k] = l[k], l[j]
            u[j], u[k] = u[k], u[j]
            perm[j], perm[k] = perm[k], perm[j]
        s = sig[j, j]
        for r in range(j):
            s -= L[j, r] * L[j, r]
        if s < -0.01:
            return L, l, u, perm, False
        if s < eps:
            s = eps
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, d):
            acc = sig[i, j]
            for r in range(j):
                acc -= L[i, r] * L[j, r]
            L[i, j] = acc / L[j, j]
        cz = 0.0
        for r in range(j):
            cz += L[j, r] * z[r]
        tl = (l[j] - cz) / L[j, j]
        tu = (u[j] - cz) / L[j, j]
        w = ln_npr(tl, tu)
        el = math.exp(-0.5 * tl * tl - w - HALF_LOG_2PI) if np.isfinite(tl) else 0.0
        eu = math.exp(-0.5 * tu * tu - w - HALF_LOG_2PI) if np.isfinite(tu) else 0.0
        z[j] = el - eu
    return L, l, u, perm, True


@njit(cache=True)
def _gradpsi(y, L, l, u):
    d = u.size
    x = np.zeros(d)
    mu = np.zeros(d)
    x[: d - 1] = y[: d - 1]
    mu[: d - 1] = y[d - 1:]
    c = L @ x
    P = np.empty(d)
    dP = np.empty(d)
    for k in range(d):
        lt = l[k] - mu[k] - c[k]
        ut = u[k] - mu[k] - c[k]
        w = ln_npr(lt, ut)
        pl = math.exp(-0.5 * lt * lt - w - HALF_LOG_2PI) if np.isfinite(lt) else 0.0
        pu = math.exp(-0.5 * ut * ut - w - HALF_LOG_2PI) if np.isfinite(ut) else 0.0
        P[k] = pl - pu
        ltf = lt if np.isfinite(lt) else 0.0
        utf = ut if np.isfinite(ut) else 0.0
        dP[k] = -P[k] * P[k] + ltf * pl - utf * pu
    n = d - 1
    grad = np.empty(2 * n)
    LtP = L.T @ P
    for j in range(n):
        grad[j] = -mu[j] + LtP[j]
        grad[n + j] = mu[j] - x[j] + P[j]
    DL = L * dP.reshape((d, 1))
    xx = L.T @ DL
    J = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            J[i, j] = xx[i, j]
            mx = DL[i, j] - (1.0 if i == j else 0.0)
            J[n + i, j] = mx
            J[j, n + i] = mx
        J[n + i, n + i] = 1.0 + dP[i]
    return grad, J


@njit(cache=True)
def _psy(x, L, l, u, mu):
    c = L @ x
    s = 0.0
    for k in range(u.size):
        s += ln_npr(l[k] - mu[k] - c[k], u[k] - mu[k] - c[k]) + 0.5 * mu[k] * mu[k] - x[k] * mu[k]
    return s


@njit(cache=True)
def _newton(y, L, l, u, tol, maxit):
    g, J = _gradpsi(y, L, l, u)
    f = 0.5 * np.dot(g, g)
    for _ in range(maxit):
        if math.sqrt(2.0 * f) < tol:
            return y, True
        step = np.linalg.solve(J, -g)
        t = 1.0
        improved = False
        for _ in range(40):
            y_new = y + t * step
            g_new, J_new = _gradpsi(y_new, L, l, u)
            f_new = 0.5 * np.dot(g_new, g_new)
            if np.isfinite(f_new) and f_new <= (1.0 - 1e-4 * t) * f:
                improved = True
                break
            t *= 0.5
        if not improved:
            return y, math.sqrt(2.0 * f) < 1e3 * tol
        y, g, J, f = y_new, g_new, J_new, f_new
    return y, math.sqrt(2.0 * f) < tol


@njit(cache=True)
def _propose(L, l, u, mu, rng, z):
    # one tilted sequential proposal; fills z and returns its log-weight
    d = u.size
    logpr = 0.0
    for k in range(d):
        col = 0.0
        for j in range(k):
            col += L[k, j] * z[j]
        tl = l[k] - mu[k] - col
        tu = u[k] - mu[k] - col
        z[k] = mu[k] + trandn(tl, tu, rng)
        logpr += ln_npr(tl, tu) + 0.5 * mu[k] * mu[k] - mu[k] * z[k]
    return logpr


@njit(cache=True)
def _exact_draws(Lfull, L, l, u, mu, psistar, perm, n, rng, max_trials):
    d = u.size
    out = np.empty((n, d))
    z = np.empty(d)
    trials = 0
    for i in range(n):
        while True:
            trials += 1
            if trials > max_trials:
                return out, -1
            logpr = _propose(L, l, u, mu, rng, z)
            if -math.log(rng.random()) > psistar - logpr:
                break
        x = Lfull @ z
        for j in range(d):
            out[i, perm[j]] = x[j]
    return out, trials


@njit(cache=True)
def _log_weights(L, l, u, mu, n, rng):
    z = np.empty(u.size)
    out = np.empty(n)
    for i in range(n):
        out[i] = _propose(L, l, u, mu, rng, z)
    return out


@njit(cache=True)
def _coordinate_sweeps(prec, upper, x, sweeps, rng):
    k = upper.size
    x = x.copy()
    for _ in range(sweeps):
        for i in range(k):
            acc = 0.0
            for j in range(k):
                if j != i:
                    acc += prec[i, j] * x[j]
            s = 1.0 / math.sqrt(prec[i, i])
            m = -acc / prec[i, i]
            x[i] = m + s * trandn(-np.inf, (upper[i] - m) / s, rng)
    return x


# ---------------------------------------------------------------------------
# tilted proposal


@dataclass
class TiltedProposal:
    """Fitted minimax-tilted proposal for one truncation problem."""

    lfull: np.ndarray
    l_scaled: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    perm: np.ndarray
    mu: np.ndarray
    x: np.ndarray
    psi_star: float
    solution: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.hi.size

    def draw(self, n: int, rng) -> tuple[np.ndarray, int]:
        out, trials = _exact_draws(self.lfull, self.l_scaled, self.lo, self.hi, self.mu,
                                   self.psi_star, self.perm, int(n), rng, MAX_TRIALS * max(n, 1))
        if trials < 0:
            raise TmvnError("tilted rejection sampler exceeded its trial budget")
        return out, trials

    def log_weights(self, n: int, rng) -> np.ndarray:
        return _log_weights(self.l_scaled, self.lo, self.hi, self.mu, int(n), rng)


def _solve_tilting(L, l, u, y0):
    y, ok = _newton(y0.copy(), L, l, u, 1e-10, 100)
    if ok:
        return y
    res = optimize.root(lambda v: _gradpsi(v, L, l, u), np.zeros_like(y0), jac=True,
                        method="hybr")
    if res.success and np.all(np.isfinite(res.x)):
        return res.x
    raise TmvnError(f"minimax tilting equations did not converge: {res.message}")


def fit_tilted_proposal(spec: TruncationSpec, warm: TiltedProposal | None = None,
                        check_floor: bool = True) -> TiltedProposal:
    """Order variables, factorize and solve the tilting saddle point."""
    sig = spec.jittered_sigma()
    k = spec.dim
    lo = np.full(k, -np.inf)
    lfull, lo, hi, perm, ok = _cholperm(np.ascontiguousarray(sig), lo, spec.upper.copy())
    if not ok:
        raise TmvnError("covariance is not positive semi-definite")
    diag = np.diag(lfull).copy()
    hi = hi / diag
    lo = lo / diag
    L = lfull / diag[:, None] - np.eye(k)
    n = k - 1
    if n == 0:
        y = np.empty(0)
    else:
        y0 = np.zeros(2 * n)
        if warm is not None and warm.dim == k:
            # carry the previous saddle point over through the variable labels
            xo = np.empty(k)
            mo = np.empty(k)
            xo[warm.perm] = warm.x
            mo[warm.perm] = warm.mu
            y0[:n] = xo[perm[:n]]
            y0[n:] = mo[perm[:n]]
        y = _solve_tilting(L, lo, hi, y0)
    x = np.zeros(k)
    mu = np.zeros(k)
    x[:n] = y[:n]
    mu[:n] = y[n:]
    psi_star = float(_psy(x, L, lo, hi, mu))
    if check_floor and psi_star < LOG_PROB_FLOOR:
        raise TmvnError(f"truncation region has log-probability {psi_star:.1f} < {LOG_PROB_FLOOR}")
    return TiltedProposal(lfull=lfull, l_scaled=np.ascontiguousarray(L), lo=lo, hi=hi,
                          perm=perm, mu=mu, x=x, psi_star=psi_star, solution=y)


# ---------------------------------------------------------------------------
# public operations


def sample_tmvn_upper(spec: TruncationSpec, rng, size: int | None = None,
                      proposal: TiltedProposal | None = None) -> np.ndarray:
    """Exact draw(s) from ``N(0, sigma) | x <= upper``."""
    rng = as_generator(rng)
    n = 1 if size is None else int(size)
    if spec.dim == 0:
        out = np.empty((n, 0))
    else:
        if proposal is None:
            proposal = fit_tilted_proposal(spec)
        out, _ = proposal.draw(n, rng)
        # rounding in the final back-transform must not break the constraint
        np.minimum(out, spec.upper, out=out)
    return out[0] if size is None else out


def mc_region_log_prob(spec: TruncationSpec, n_mc: int, rng,
                       proposal: TiltedProposal | None = None) -> tuple[float, float]:
    """Importance-sampling estimate of ``log P(N(0, sigma) <= upper)``.

    Returns the log of the unbiased probability estimate and its standard
    error on the log scale (the relative error of the estimate).
    """
    rng = as_generator(rng)
    if spec.dim == 0:
        return 0.0, 0.0
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    if proposal is None:
        proposal = fit_tilted_proposal(spec, check_floor=False)
    logw = proposal.log_weights(n_mc, rng)
    top = float(np.max(logw))
    w = np.exp(logw - top)
    mean = float(np.mean(w))
    se_rel = float(np.std(w, ddof=1) / math.sqrt(n_mc) / mean) if n_mc > 1 else math.inf
    return top + math.log(mean), se_rel


@dataclass
class TmvnKernel:
    """Per-chain truncated-normal updater used inside the Gibbs sampler.

    Exact tilted draws are used up to ``exact_max_dim``; the fitted proposal
    warm-starts the next fit, and is reused outright when ``sigma_fixed``.
    Above the threshold, ``sweeps`` coordinate Gibbs sweeps are applied to the
    carried state, which keeps the outer chain valid but correlated.
    """

    exact_max_dim: int = EXACT_MAX_DIM
    sweeps: int = GIBBS_SWEEPS
    sigma_fixed: bool = False
    _proposal: TiltedProposal | None = field(default=None, repr=False)

    def exact(self, k: int) -> bool:
        return k <= self.exact_max_dim

    def draw(self, upper: np.ndarray, sigma: np.ndarray, rng, current: np.ndarray | None = None,
             chol: np.ndarray | None = None) -> np.ndarray:
        rng = as_generator(rng)
        k = upper.size
        if k == 0:
            return np.empty(0)
        if k == 1:
            s = math.sqrt(sigma[0, 0])
            return np.array([s * trandn(-np.inf, upper[0] / s, rng)])
        if self.exact(k):
            spec = TruncationSpec.trusted(upper, sigma)
            if not (self.sigma_fixed and self._proposal is not None):
                self._proposal = fit_tilted_proposal(spec, warm=self._proposal)
            return sample_tmvn_upper(spec, rng, proposal=self._proposal)
        if current is None or np.any(current > upper):
            current = np.minimum(upper, 0.0) - 1.0
        if chol is None:
            chol = np.linalg.cholesky(sigma + np.eye(k) * (1e-10 * np.trace(sigma) / k))
        inv_chol = np.linalg.inv(chol)
        prec = inv_chol.T @ inv_chol
        return _coordinate_sweeps(np.ascontiguousarray(prec), upper, current, self.sweeps, rng)
