"""The perturbed unified skew-normal (pSUN) family.

``Y = xi + diag^{1/2}(Omega) Z`` conditionally on ``T <= A Z + b`` where
``Z = diag^{1/2}(W) R`` with ``R ~ N(0, Omega_bar)``, ``W ~ Q_W`` and
``T = diag^{1/2}(V) S`` with ``S ~ N(0, Theta)``, ``V ~ Q_V``. This module
evaluates the density, estimates the normalising probability
``Psi = P(T - A Z <= b)`` and runs the blocked Gibbs sampler over
``(V, W, eps, Z)`` with ``eps = A Z - T``.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from ._numerics import as_generator
from .gausscdf import EXACT_MAX_DIM, log_mvn_cdf_exact
from .mixing import (
    DlState,
    MixingLaw,
    PointMass,
    ProductLaw,
    check_compatible,
    component_logcdf,
    component_logpdf,
    sample_prior,
    w_full_conditional,
)
from .tmvn import TmvnKernel, TruncationSpec, mc_region_log_prob

__all__ = [
    "PsunParams",
    "GibbsState",
    "GibbsSampler",
    "DrawMatrix",
    "ChainConfig",
    "psun_log_density",
    "psi_estimate",
    "log_psi_estimate",
    "gibbs_step",
    "initial_state",
    "sample_chain",
    "sample_chains",
    "sample_by_rejection",
    "clear_psi_cache",
]


def _is_identity(mat: np.ndarray) -> bool:
    return mat.shape[0] == mat.shape[1] and np.array_equal(mat, np.eye(mat.shape[0]))


def _is_diagonal(mat: np.ndarray) -> bool:
    return not np.any(mat - np.diag(np.diag(mat)))


def _law_point_value(law: MixingLaw) -> np.ndarray | None:
    """Per-component constants of a degenerate law, else ``None``."""
    if not law.is_point_mass:
        return None
    return law.initial()


@dataclass(frozen=True, eq=False)
class PsunParams:
    """Parameters ``(xi, Omega, Q_W, A, b, Theta, Q_V)`` of a pSUN law.

    ``a_mat`` is ``m x d``: it maps the ``d``-dimensional ``Z`` to the
    ``m``-dimensional conditioning space.
    """

    xi: np.ndarray
    omega: np.ndarray
    q_w: MixingLaw
    a_mat: np.ndarray
    b_vec: np.ndarray
    theta: np.ndarray
    q_v: MixingLaw

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        d = xi.size
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim == 1:
            omega = np.diag(omega)
        b = np.atleast_1d(np.asarray(self.b_vec, dtype=float)).ravel()
        m = b.size
        a = np.asarray(self.a_mat, dtype=float).reshape(m, d)
        theta = np.asarray(self.theta, dtype=float).reshape(m, m)
        if omega.shape != (d, d):
            raise ValueError(f"omega must be {d}x{d}")
        if not np.all(np.isfinite(xi)) or not np.all(np.isfinite(a)) or np.any(np.isnan(b)):
            raise ValueError("xi and A must be finite, b must not be NaN")
        if np.max(np.abs(omega - omega.T), initial=0.0) > 1e-10 * max(1.0, np.abs(omega).max()):
            raise ValueError("omega must be symmetric")
        try:
            np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise ValueError("omega must be positive definite") from exc
        if m:
            if np.max(np.abs(np.diag(theta) - 1.0)) > 1e-10:
                raise ValueError("theta must have unit diagonal")
            if np.max(np.abs(theta - theta.T)) > 1e-10:
                raise ValueError("theta must be symmetric")
            if np.linalg.eigvalsh(theta)[0] < -1e-10:
                raise ValueError("theta must be positive semi-definite")
        if self.q_w.dimension != d:
            raise ValueError(f"q_w dimension {self.q_w.dimension} != d = {d}")
        if self.q_v.dimension != m:
            raise ValueError(f"q_v dimension {self.q_v.dimension} != m = {m}")
        sd = np.sqrt(np.diag(omega))
        omega_bar = omega / np.outer(sd, sd)
        np.fill_diagonal(omega_bar, 1.0)
        check_compatible(self.q_w, omega_bar)
        if m:
            check_compatible(self.q_v, theta)
        for name, val in (("xi", xi), ("omega", omega), ("a_mat", a), ("b_vec", b),
                          ("theta", theta), ("omega_sd", sd), ("omega_bar", omega_bar)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def d(self) -> int:
        return self.xi.size

    @property
    def m(self) -> int:
        return self.b_vec.size

    def key(self) -> str:
        """Content hash used to cache the normalising probability."""
        h = hashlib.sha1()
        for arr in (self.xi, self.omega, self.a_mat, self.b_vec, self.theta):
            h.update(np.ascontiguousarray(arr).tobytes())
            h.update(str(arr.shape).encode())
        h.update(repr(self.q_w).encode())
        h.update(repr(self.q_v).encode())
        return h.hexdigest()


@dataclass
class GibbsState:
    z: np.ndarray
    t: np.ndarray
    w: np.ndarray
    v: np.ndarray
    eps: np.ndarray
    y: np.ndarray
    dl_state: DlState | None = None


# ---------------------------------------------------------------------------
# density and normalising constant

_PSI_CACHE: OrderedDict = OrderedDict()
_PSI_CACHE_SIZE = 256


def clear_psi_cache() -> None:
    _PSI_CACHE.clear()


def _log_mean_exp(logs: np.ndarray) -> tuple[float, float]:
    """log of a Monte Carlo mean and its log-scale standard error."""
    logs = np.asarray(logs, float)
    top = float(np.max(logs))
    if top == -math.inf:
        return -math.inf, math.inf
    w = np.exp(logs - top)
    mean = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(w.size) / mean) if w.size > 1 else math.inf
    return top + math.log(mean), se


def _gauss_log_cdf(x: np.ndarray, cov: np.ndarray, n_mc: int, rng) -> tuple[float, float]:
    keep = np.isfinite(x)
    if np.any(x == -np.inf):
        return -math.inf, 0.0
    x = x[keep]
    cov = cov[np.ix_(keep, keep)]
    if x.size == 0:
        return 0.0, 0.0
    if _is_diagonal(cov):
        return float(np.sum(special.log_ndtr(x / np.sqrt(np.diag(cov))))), 0.0
    if x.size <= EXACT_MAX_DIM:
        return log_mvn_cdf_exact(x, cov), 0.0
    return mc_region_log_prob(TruncationSpec(x, cov), n_mc, rng)


def _scaled_corr(corr: np.ndarray, scales: np.ndarray) -> np.ndarray:
    s = np.sqrt(scales)
    return corr * np.outer(s, s)


def _log_mixture_pdf(law: MixingLaw, corr: np.ndarray, z: np.ndarray, n_mc: int, rng):
    """log of the scale-mixture density of ``z`` with correlation ``corr``."""
    d = z.size
    const = _law_point_value(law)
    if const is not None:
        cov = _scaled_corr(corr, const)
        chol = np.linalg.cholesky(cov)
        u = linalg.solve_triangular(chol, z, lower=True)
        return -0.5 * d * math.log(2 * math.pi) - np.log(np.diag(chol)).sum() - 0.5 * u @ u, 0.0
    if _is_diagonal(corr) and law.closed_form:
        return float(np.sum(component_logpdf(law, z))), 0.0
    logs = np.empty(n_mc)
    for i in range(n_mc):
        w = sample_prior(law, rng)
        cov = _scaled_corr(corr, w)
        chol = np.linalg.cholesky(cov)
        u = linalg.solve_triangular(chol, z, lower=True)
        logs[i] = -0.5 * d * math.log(2 * math.pi) - np.log(np.diag(chol)).sum() - 0.5 * u @ u
    return _log_mean_exp(logs)


def _log_mixture_cdf(law: MixingLaw, corr: np.ndarray, x: np.ndarray, n_mc: int, rng,
                     inner_mc: int):
    const = _law_point_value(law)
    if const is not None:
        return _gauss_log_cdf(x, _scaled_corr(corr, const), n_mc, rng)
    if _is_diagonal(corr) and law.closed_form:
        return float(np.sum(component_logcdf(law, x))), 0.0
    logs = np.empty(n_mc)
    for i in range(n_mc):
        v = sample_prior(law, rng)
        logs[i] = _gauss_log_cdf(x, _scaled_corr(corr, v), inner_mc, rng)[0]
    return _log_mean_exp(logs)


def _sigma_eps(params: PsunParams, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    aw = params.a_mat * np.sqrt(w)
    if _is_identity(params.omega_bar):
        s = aw @ aw.T
    else:
        s = aw @ params.omega_bar @ aw.T
    s += _scaled_corr(params.theta, v)
    return 0.5 * (s + s.T)


def log_psi_estimate(params: PsunParams, n_mc: int = 2000, rng=None,
                     inner_mc: int = 64, use_cache: bool = True) -> tuple[float, float]:
    """``log Psi`` and its log-scale standard error.

    Mixing variables are drawn from their priors; for each draw the Gaussian
    rectangle probability under ``Theta_V + A Omega_bar_W A'`` is evaluated
    exactly when possible and by tilted importance sampling otherwise.
    """
    if params.m == 0 or np.all(params.b_vec == np.inf):
        return 0.0, 0.0
    key = (params.key(), int(n_mc), int(inner_mc))
    if use_cache and key in _PSI_CACHE:
        _PSI_CACHE.move_to_end(key)
        return _PSI_CACHE[key]
    rng = as_generator(rng)
    wc = _law_point_value(params.q_w)
    vc = _law_point_value(params.q_v)
    if wc is not None and vc is not None:
        out = _gauss_log_cdf(params.b_vec, _sigma_eps(params, wc, vc), n_mc, rng)
    else:
        logs = np.empty(n_mc)
        for i in range(n_mc):
            w = wc if wc is not None else sample_prior(params.q_w, rng)
            v = vc if vc is not None else sample_prior(params.q_v, rng)
            logs[i] = _gauss_log_cdf(params.b_vec, _sigma_eps(params, w, v), inner_mc, rng)[0]
        out = _log_mean_exp(logs)
    out = (float(out[0]), float(out[1]))
    if use_cache:
        _PSI_CACHE[key] = out
        if len(_PSI_CACHE) > _PSI_CACHE_SIZE:
            _PSI_CACHE.popitem(last=False)
    return out


def psi_estimate(params: PsunParams, n_mc: int = 2000, rng=None, **kw) -> tuple[float, float]:
    """``Psi = P(T - A Z <= b)`` and its standard error."""
    lp, se = log_psi_estimate(params, n_mc, rng, **kw)
    p = math.exp(lp)
    return p, p * se


def psun_log_density(params: PsunParams, y, n_mc: int = 2000, rng=None,
                     inner_mc: int = 64) -> tuple[float, float]:
    """Log density at ``y`` and its Monte Carlo standard error.

    Degenerate mixing laws and independent components with closed-form
    marginals are evaluated deterministically (standard error 0).
    """
    rng = as_generator(rng)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size != params.d:
        raise ValueError(f"y must have length {params.d}")
    z = (y - params.xi) / params.omega_sd
    lf, se_f = _log_mixture_pdf(params.q_w, params.omega_bar, z, n_mc, rng)
    lf -= float(np.sum(np.log(params.omega_sd)))
    if params.m == 0:
        total, se = lf, se_f
    else:
        x = params.a_mat @ z + params.b_vec
        lc, se_c = _log_mixture_cdf(params.q_v, params.theta, x, n_mc, rng, inner_mc)
        lp, se_p = log_psi_estimate(params, n_mc, rng, inner_mc)
        total = lf + lc - lp
        se = math.sqrt(se_f ** 2 + se_c ** 2 + se_p ** 2)
    if not np.isfinite(total) and total != -math.inf:
        raise FloatingPointError("non-finite log density")
    return float(total), float(se)


# ---------------------------------------------------------------------------
# Gibbs sampler


class GibbsSampler:
    """Precomputed pieces of the blocked Gibbs kernel for one parameter set.

    Holds the per-chain truncated-normal kernel, so one instance must not be
    shared between concurrently running chains.
    """

    def __init__(self, params: PsunParams, exact_max_dim: int = 200, sweeps: int = 5):
        self.params = params
        self.chol_omega_bar = np.linalg.cholesky(params.omega_bar)
        self.omega_bar_identity = _is_identity(params.omega_bar)
        m = params.m
        if m:
            th = params.theta + np.eye(m) * 1e-12
            self.chol_theta = np.linalg.cholesky(th)
        else:
            self.chol_theta = np.zeros((0, 0))
        self.theta_identity = _is_identity(params.theta)
        self.w_const = _law_point_value(params.q_w)
        self.v_const = _law_point_value(params.q_v)
        fixed = self.w_const is not None and self.v_const is not None
        self.kernel = TmvnKernel(exact_max_dim=exact_max_dim, sweeps=sweeps, sigma_fixed=fixed)
        self._fixed_cache = None

    def _draw_w(self, state: GibbsState, rng):
        if self.w_const is not None:
            return self.w_const, state.dl_state
        return w_full_conditional(self.params.q_w, state.z, self.params.omega_bar, rng,
                                  state.dl_state)

    def _draw_v(self, state: GibbsState, rng):
        if self.v_const is not None:
            return self.v_const
        corr = None if self.theta_identity else self.params.theta
        v, _ = w_full_conditional(self.params.q_v, state.t, corr, rng)
        return v

    def _gaussian_layer(self, w, v):
        """Sigma_eps, its Cholesky factor and the gain Omega_bar_W A'."""
        if self._fixed_cache is not None:
            return self._fixed_cache
        p = self.params
        sw = np.sqrt(w)
        aw = p.a_mat * sw
        if self.omega_bar_identity:
            cross = aw.T * sw[:, None]
            sig = aw @ aw.T
        else:
            ob_awt = p.omega_bar @ aw.T
            cross = ob_awt * sw[:, None]
            sig = aw @ ob_awt
        if self.theta_identity:
            sig[np.diag_indices_from(sig)] += v
        else:
            sig += _scaled_corr(p.theta, v)
        sig = 0.5 * (sig + sig.T)
        k = sig.shape[0]
        chol = np.linalg.cholesky(sig + np.eye(k) * (1e-10 * np.trace(sig) / k))
        out = (sig, chol, cross)
        if self.kernel.sigma_fixed:
            self._fixed_cache = out
        return out

    def _draw_z0(self, w, rng):
        r = rng.standard_normal(self.params.d)
        if not self.omega_bar_identity:
            r = self.chol_omega_bar @ r
        return np.sqrt(w) * r

    def step(self, state: GibbsState, rng) -> GibbsState:
        p = self.params
        v = self._draw_v(state, rng) if p.m else state.v
        w, dl_state = self._draw_w(state, rng)
        z0 = self._draw_z0(w, rng)
        if p.m == 0:
            z = z0
            t = np.empty(0)
            eps = np.empty(0)
        else:
            sig, chol, cross = self._gaussian_layer(w, v)
            delta = self.kernel.draw(p.b_vec, sig, rng, current=-state.eps, chol=chol)
            eps = -delta
            s = rng.standard_normal(p.m)
            if not self.theta_identity:
                s = self.chol_theta @ s
            t0 = np.sqrt(v) * s
            eps0 = p.a_mat @ z0 - t0
            z = z0 + cross @ linalg.cho_solve((chol, True), eps - eps0)
            t = p.a_mat @ z - eps
        y = p.xi + p.omega_sd * z
        return GibbsState(z=z, t=t, w=np.array(w, dtype=float), v=np.array(v, dtype=float),
                          eps=eps, y=y, dl_state=dl_state)


def initial_state(params: PsunParams, rng) -> GibbsState:
    """Deterministic start: ``Z = 0``, ``W`` at its prior mean, ``V`` from its prior.

    ``eps`` starts at ``max(-b, 0) + 1`` so that ``T = A Z - eps`` satisfies the
    constraint before the first update.
    """
    rng = as_generator(rng)
    d, m = params.d, params.m
    z = np.zeros(d)
    w = params.q_w.initial()
    v = sample_prior(params.q_v, rng) if m else np.empty(0)
    eps = np.maximum(-params.b_vec, 0.0) + 1.0
    t = params.a_mat @ z - eps
    return GibbsState(z=z, t=t, w=w, v=v, eps=eps, y=params.xi + params.omega_sd * z)


def gibbs_step(params: PsunParams, state: GibbsState, rng,
               sampler: GibbsSampler | None = None) -> GibbsState:
    """One scan ``V | T``, ``W | Z``, ``eps | V, W``, ``Z | eps, V, W``."""
    if sampler is None:
        sampler = GibbsSampler(params)
    return sampler.step(state, as_generator(rng))


@dataclass(frozen=True)
class ChainConfig:
    iters: int = 10_000
    burnin: int = 1_000
    thin: int = 1
    seed: int = 0
    chains: int = 1
    keep_scales: bool = False
    exact_max_dim: int = 200
    sweeps: int = 5

    def __post_init__(self):
        if not (self.iters > self.burnin >= 0):
            raise ValueError("require iters > burnin >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def kept(self) -> int:
        return len(range(self.burnin, self.iters, self.thin))


@dataclass
class DrawMatrix:
    """Retained draws, one row per draw, with the chain index of each row."""

    draws: np.ndarray
    chain: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)
    w_trace: np.ndarray | None = None
    v_trace: np.ndarray | None = None
    names: list[str] | None = None

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def n_chains(self) -> int:
        return int(self.chain.max()) + 1 if self.chain.size else 0

    def by_chain(self) -> list[np.ndarray]:
        return [self.draws[self.chain == c] for c in range(self.n_chains)]

    def map(self, fn) -> "DrawMatrix":
        """New draw matrix with ``fn`` applied to the draw array."""
        return DrawMatrix(draws=fn(self.draws), chain=self.chain, seed=self.seed,
                          config=dict(self.config), w_trace=self.w_trace, v_trace=self.v_trace)

    def column_names(self) -> list[str]:
        if self.names is not None:
            return list(self.names)
        return [f"beta{j + 1}" for j in range(self.draws.shape[1])]


def _run_one_chain(params: PsunParams, config: ChainConfig, rng, init: GibbsState | None):
    sampler = GibbsSampler(params, exact_max_dim=config.exact_max_dim, sweeps=config.sweeps)
    state = initial_state(params, rng) if init is None else init
    n_keep = config.kept
    out = np.empty((n_keep, params.d))
    wt = np.empty((n_keep, params.d)) if config.keep_scales else None
    vt = np.empty((n_keep, params.m)) if config.keep_scales else None
    j = 0
    for it in range(config.iters):
        state = sampler.step(state, rng)
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            out[j] = state.y
            if wt is not None:
                wt[j] = state.w
                vt[j] = state.v
            j += 1
    return out, wt, vt


def sample_chains(params: PsunParams, config: ChainConfig,
                  init: GibbsState | None = None) -> DrawMatrix:
    """Run ``config.chains`` independent chains; deterministic given the seed."""
    children = np.random.SeedSequence(config.seed).spawn(config.chains)
    blocks, wts, vts = [], [], []
    for seq in children:
        rng = np.random.default_rng(seq)
        out, wt, vt = _run_one_chain(params, config, rng, init)
        blocks.append(out)
        wts.append(wt)
        vts.append(vt)
    chain = np.repeat(np.arange(config.chains), config.kept)
    return DrawMatrix(
        draws=np.vstack(blocks), chain=chain, seed=config.seed,
        config=dict(iters=config.iters, burnin=config.burnin, thin=config.thin,
                    chains=config.chains, seed=config.seed),
        w_trace=np.vstack(wts) if config.keep_scales else None,
        v_trace=np.vstack(vts) if config.keep_scales else None)


def sample_chain(params: PsunParams, iters: int, burnin: int = 0, thin: int = 1, seed: int = 0,
                 init: GibbsState | None = None, keep_scales: bool = False, **kw) -> DrawMatrix:
    """Single-chain convenience wrapper around ``sample_chains``."""
    return sample_chains(params, ChainConfig(iters=iters, burnin=burnin, thin=thin, seed=seed,
                                             keep_scales=keep_scales, **kw), init=init)


def sample_by_rejection(params: PsunParams, n: int, rng, max_batches: int = 10_000) -> np.ndarray:
    """Exact draws by proposing ``(Z, T)`` from their priors and keeping ``T <= AZ + b``.

    The acceptance rate is ``Psi``, so this is only practical for small ``m``;
    it serves as an independent reference for the Gibbs sampler.
    """
    rng = as_generator(rng)
    out = []
    got = 0
    batch = max(256, n)
    for _ in range(max_batches):
        for _ in range(batch):
            w = sample_prior(params.q_w, rng)
            z = np.sqrt(w) * (np.linalg.cholesky(params.omega_bar) @ rng.standard_normal(params.d))
            if params.m:
                v = sample_prior(params.q_v, rng)
                s = np.linalg.cholesky(params.theta + 1e-12 * np.eye(params.m)) @ \
                    rng.standard_normal(params.m)
                if np.any(np.sqrt(v) * s > params.a_mat @ z + params.b_vec):
                    continue
            out.append(params.xi + params.omega_sd * z)
            got += 1
            if got == n:
                return np.array(out)
    raise RuntimeError("rejection sampler did not collect enough draws")


def pointmass(dimension: int, value: float = 1.0) -> PointMass:
    return PointMass(dimension=dimension, value=value)


def product(*laws: MixingLaw) -> ProductLaw:
    return ProductLaw.of(*laws)
