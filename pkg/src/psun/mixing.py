"""Positive-orthant mixing laws for the two Gaussian layers.

A law governs ``dimension`` scale variables ``s_j`` with ``x_j | s_j ~ N(0, s_j)``.
Each law knows how to draw from its prior and from the full conditional
``s | x``. When the layer correlation is the identity the conditional factorises
over components; otherwise only laws shared across components (an elliptical
layer) are supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from . import lk
from ._numerics import as_generator
from .gig import gig_sample

__all__ = [
    "MixingLaw",
    "PointMass",
    "Exponential",
    "InverseGamma",
    "LogisticKolmogorov",
    "DirichletLaplace",
    "ProductLaw",
    "DlState",
    "sample_prior",
    "gig_sample",
    "w_full_conditional",
    "dl_update",
    "dl_prior_state",
    "check_compatible",
    "UnsupportedLawError",
]

DL_JITTER = 1e-10


class UnsupportedLawError(ValueError):
    """A mixing law was paired with a layer correlation it cannot handle."""


@dataclass(frozen=True)
class MixingLaw:
    dimension: int

    #: True when one scale variable is shared by all components (elliptical layer)
    shared = False
    #: True when the marginal of x = sqrt(s) N(0, 1) has closed-form pdf/cdf
    closed_form = True

    def __post_init__(self):
        if int(self.dimension) < 0:
            raise ValueError("dimension must be non-negative")

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def conditional(self, x: np.ndarray, rng, quad: float | None = None) -> np.ndarray:
        """Draw s | x for independent components (``quad`` used by shared laws)."""
        raise NotImplementedError

    def initial(self) -> np.ndarray:
        """Deterministic starting value: prior mean when finite, else ones."""
        return np.ones(self.dimension)

    def with_dimension(self, dimension: int) -> "MixingLaw":
        return replace(self, dimension=dimension)

    # marginals of a single component x = sqrt(s) * N(0, 1)
    def marginal_logpdf(self, x):
        raise NotImplementedError

    def marginal_logcdf(self, x):
        raise NotImplementedError

    @property
    def is_point_mass(self) -> bool:
        return False


@dataclass(frozen=True)
class PointMass(MixingLaw):
    value: float = 1.0
    shared = True

    def __post_init__(self):
        super().__post_init__()
        if not self.value > 0:
            raise ValueError("PointMass value must be positive")

    @property
    def is_point_mass(self) -> bool:
        return True

    def sample(self, rng, size=None):
        return np.full(self.dimension if size is None else size, float(self.value))

    def conditional(self, x, rng, quad=None):
        return np.full(np.shape(x), float(self.value))

    def initial(self):
        return np.full(self.dimension, float(self.value))

    def marginal_logpdf(self, x):
        return stats.norm.logpdf(x, scale=math.sqrt(self.value))

    def marginal_logcdf(self, x):
        return special.log_ndtr(np.asarray(x) / math.sqrt(self.value))


@dataclass(frozen=True)
class Exponential(MixingLaw):
    """Exponential scales; rate 1/2 gives a Laplace(0, 1) marginal."""

    rate: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        if not self.rate > 0:
            raise ValueError("Exponential rate must be positive")

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        return rng.exponential(1.0 / self.rate, self.dimension if size is None else size)

    def conditional(self, x, rng, quad=None):
        x = np.asarray(x, float)
        return gig_sample(0.5, x * x, 2.0 * self.rate, rng, size=x.shape)

    def initial(self):
        return np.full(self.dimension, 1.0 / self.rate)

    @property
    def _laplace_scale(self):
        return 1.0 / math.sqrt(2.0 * self.rate)

    def marginal_logpdf(self, x):
        return stats.laplace.logpdf(x, scale=self._laplace_scale)

    def marginal_logcdf(self, x):
        return stats.laplace.logcdf(x, scale=self._laplace_scale)


@dataclass(frozen=True)
class InverseGamma(MixingLaw):
    """Inverse-gamma scales; shape = scale = nu/2 gives a Student-t_nu marginal.

    With ``shared=True`` a single scale multiplies the whole layer, which makes
    the layer elliptical and compatible with a full correlation matrix.
    """

    shape: float = 0.5
    scale: float = 0.5
    shared_scale: bool = False

    def __post_init__(self):
        super().__post_init__()
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("InverseGamma shape and scale must be positive")

    @property
    def shared(self):  # type: ignore[override]
        return self.shared_scale

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        n = self.dimension if size is None else size
        if self.shared_scale:
            return np.full(n, self.scale / rng.standard_gamma(self.shape))
        return self.scale / rng.standard_gamma(self.shape, n)

    def conditional(self, x, rng, quad=None):
        rng = as_generator(rng)
        x = np.asarray(x, float)
        if self.shared_scale:
            q = float(np.dot(x, x)) if quad is None else float(quad)
            s = (self.scale + 0.5 * q) / rng.standard_gamma(self.shape + 0.5 * x.size)
            return np.full(x.shape, s)
        return (self.scale + 0.5 * x * x) / rng.standard_gamma(self.shape + 0.5, x.shape)

    def initial(self):
        m = self.scale / (self.shape - 1.0) if self.shape > 1 else 1.0
        return np.full(self.dimension, m)

    @property
    def closed_form(self):  # type: ignore[override]
        return not self.shared_scale

    def _t(self):
        return stats.t(df=2.0 * self.shape, scale=math.sqrt(self.scale / self.shape))

    def marginal_logpdf(self, x):
        return self._t().logpdf(x)

    def marginal_logcdf(self, x):
        return self._t().logcdf(x)


@dataclass(frozen=True)
class LogisticKolmogorov(MixingLaw):
    """Scales whose Gaussian mixture is the standard logistic law."""

    def sample(self, rng, size=None):
        return lk.sample_lk(self.dimension if size is None else size, rng)

    def conditional(self, x, rng, quad=None):
        return lk.sample_v_given_t(np.asarray(x, float), rng)

    def initial(self):
        return np.full(self.dimension, math.pi ** 2 / 3.0)

    def marginal_logpdf(self, x):
        return stats.logistic.logpdf(x)

    def marginal_logcdf(self, x):
        return -np.logaddexp(0.0, -np.asarray(x, float))


@dataclass
class DlState:
    """Hierarchical state of the Dirichlet-Laplace scales.

    ``psi`` is the Dirichlet simplex, ``local`` the exponential local scales,
    ``tau`` the global scale and ``a`` the Dirichlet concentration.
    The implied Gaussian variances are ``local * psi**2 * tau**2``.
    """

    psi: np.ndarray
    local: np.ndarray
    tau: float
    a: float

    def variances(self) -> np.ndarray:
        return self.local * self.psi ** 2 * self.tau ** 2


@dataclass(frozen=True)
class DirichletLaplace(MixingLaw):
    grid_size: int = 300
    closed_form = False

    def __post_init__(self):
        super().__post_init__()
        if int(self.grid_size) < 1:
            raise ValueError("grid_size must be >= 1")

    @property
    def grid(self) -> np.ndarray:
        return np.arange(1, self.grid_size + 1) / self.grid_size

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        if size is not None and size != self.dimension:
            return np.concatenate([dl_prior_state(self, rng).variances()
                                   for _ in range(int(np.ceil(size / self.dimension)))])[:size]
        return dl_prior_state(self, rng).variances()

    def conditional(self, x, rng, quad=None):
        raise UnsupportedLawError("DirichletLaplace needs its state; use w_full_conditional")

    def initial(self):
        return np.ones(self.dimension)


@dataclass(frozen=True)
class ProductLaw(MixingLaw):
    """Concatenation of independent laws over consecutive blocks."""

    parts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if sum(p.dimension for p in self.parts) != self.dimension:
            raise ValueError("ProductLaw dimension must equal the sum of its parts")

    @classmethod
    def of(cls, *laws: MixingLaw) -> "ProductLaw":
        laws = tuple(l for l in laws if l.dimension > 0)
        return cls(dimension=sum(l.dimension for l in laws), parts=laws)

    @property
    def shared(self):  # type: ignore[override]
        return len(self.parts) <= 1 and all(p.shared for p in self.parts)

    @property
    def closed_form(self):  # type: ignore[override]
        return all(p.closed_form for p in self.parts)

    @property
    def is_point_mass(self) -> bool:
        return all(p.is_point_mass for p in self.parts)

    def _blocks(self):
        start = 0
        for p in self.parts:
            yield p, slice(start, start + p.dimension)
            start += p.dimension

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        return np.concatenate([p.sample(rng) for p in self.parts]) if self.parts else np.empty(0)

    def conditional(self, x, rng, quad=None):
        out = np.empty(self.dimension)
        for p, sl in self._blocks():
            out[sl] = p.conditional(x[sl], rng)
        return out

    def initial(self):
        return np.concatenate([p.initial() for p in self.parts]) if self.parts else np.empty(0)

    def component_logpdf(self, x):
        out = np.empty(self.dimension)
        for p, sl in self._blocks():
            out[sl] = p.marginal_logpdf(x[sl])
        return out

    def component_logcdf(self, x):
        out = np.empty(self.dimension)
        for p, sl in self._blocks():
            out[sl] = p.marginal_logcdf(x[sl])
        return out


def component_logcdf(law: MixingLaw, x: np.ndarray) -> np.ndarray:
    if isinstance(law, ProductLaw):
        return law.component_logcdf(x)
    return np.asarray(law.marginal_logcdf(x), float)


def component_logpdf(law: MixingLaw, x: np.ndarray) -> np.ndarray:
    if isinstance(law, ProductLaw):
        return law.component_logpdf(x)
    return np.asarray(law.marginal_logpdf(x), float)


# ---------------------------------------------------------------------------
# module-level operations


def sample_prior(law: MixingLaw, rng) -> np.ndarray:
    """``law.dimension`` prior draws (i.i.d. unless the law is shared)."""
    return law.sample(as_generator(rng))


def dl_prior_state(law: DirichletLaplace, rng) -> DlState:
    rng = as_generator(rng)
    p = law.dimension
    a = float(rng.choice(law.grid))
    g = rng.standard_gamma(a, p)
    # tiny concentrations can underflow every gamma draw
    g = np.maximum(g, np.finfo(float).tiny)
    psi = g / g.sum()
    tau = rng.standard_gamma(p * a) * 2.0
    local = rng.exponential(2.0, p)
    return DlState(psi=psi, local=local, tau=float(tau), a=a)


def dl_update(state: DlState, beta_scaled: np.ndarray, rng, grid_size: int = 300) -> DlState:
    """One sweep of the Dirichlet-Laplace conditionals given the coefficients.

    The simplex and global scale are drawn with the local scales integrated
    out, then the local scales, then the concentration on its grid.
    """
    rng = as_generator(rng)
    b = np.maximum(np.abs(np.asarray(beta_scaled, float)), DL_JITTER)
    p = b.size
    if state.psi.size != p:
        raise ValueError("state and beta_scaled lengths differ")
    a = state.a
    if p == 1:
        psi = np.ones(1)
    else:
        g = gig_sample(a - 1.0, 2.0 * b, 1.0, rng, size=p)
        g = np.maximum(g, np.finfo(float).tiny)
        psi = g / g.sum()
    tau = gig_sample(p * a - p, 2.0 * float(np.sum(b / psi)), 1.0, rng)
    mu = psi * tau / b
    # inverse-Gaussian(mu, 1) is GIG(-1/2, 1, 1/mu^2)
    local = 1.0 / gig_sample(-0.5, 1.0, 1.0 / mu ** 2, rng, size=p)
    grid = np.arange(1, grid_size + 1) / grid_size
    logw = (-p * special.gammaln(grid) + (grid - 1.0) * float(np.sum(np.log(psi)))
            + p * grid * math.log(tau / 2.0))
    logw -= logw.max()
    w = np.exp(logw)
    a_new = float(rng.choice(grid, p=w / w.sum()))
    return DlState(psi=psi, local=local, tau=float(tau), a=a_new)


def _is_diagonal(corr) -> bool:
    return corr is None or not np.any(corr - np.diag(np.diag(corr)))


def w_full_conditional(law: MixingLaw, z, omega_bar, rng, state: DlState | None = None):
    """Draw the scales given their Gaussian layer, e.g. W | Z or V | T.

    ``omega_bar`` is the layer correlation matrix (``None`` means identity).
    Returns ``(w, state)``; ``state`` is only meaningful for Dirichlet-Laplace.
    Product laws are handled block by block and need a block-diagonal
    correlation matching their parts.
    """
    rng = as_generator(rng)
    z = np.asarray(z, float)
    if isinstance(law, ProductLaw):
        out = np.empty(law.dimension)
        for part, sl in law._blocks():
            sub = None if omega_bar is None else omega_bar[sl, sl]
            if omega_bar is not None and (np.any(omega_bar[sl, :sl.start])
                                          or np.any(omega_bar[sl, sl.stop:])):
                raise UnsupportedLawError("product law needs a block-diagonal correlation")
            out[sl], state = w_full_conditional(part, z[sl], sub, rng, state)
        return out, state
    diagonal = _is_diagonal(omega_bar)
    if isinstance(law, DirichletLaplace):
        if not diagonal:
            raise UnsupportedLawError("Dirichlet-Laplace requires a diagonal Omega")
        if state is None:
            state = dl_prior_state(law, rng)
        state = dl_update(state, z, rng, law.grid_size)
        return state.variances(), state
    if law.is_point_mass or diagonal:
        return law.conditional(z, rng), state
    if law.shared:
        quad = float(z @ np.linalg.solve(omega_bar, z))
        return law.conditional(z, rng, quad=quad), state
    raise UnsupportedLawError(
        f"{type(law).__name__} with independent components needs a diagonal Omega")


def check_compatible(law: MixingLaw, corr: np.ndarray) -> None:
    """Raise ``UnsupportedLawError`` if W | Z cannot be drawn for this pairing."""
    if isinstance(law, ProductLaw):
        for part, sl in law._blocks():
            if np.any(corr[sl, :sl.start]) or np.any(corr[sl, sl.stop:]):
                raise UnsupportedLawError("product law needs a block-diagonal correlation")
            check_compatible(part, corr[sl, sl])
        return
    if _is_diagonal(corr) or law.is_point_mass or (law.shared and not isinstance(law, DirichletLaplace)):
        return
    raise UnsupportedLawError(
        f"{type(law).__name__} with independent components needs a diagonal correlation")
