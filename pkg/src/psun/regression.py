"""Bayesian binary regression with probit or logit link under pSUN priors.

The likelihood ``prod_i Lambda((2 y_i - 1) x_i' beta)`` is the probability
that ``n`` extra scale-mixture variables fall below a linear function of
``beta``, so a pSUN prior yields a pSUN posterior with ``m + n`` conditioning
components. Probit adds unit-variance Gaussian components, logit adds
logistic-Kolmogorov mixed ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from ._numerics import as_generator
from .core import ChainConfig, DrawMatrix, PsunParams, log_psi_estimate, sample_chains
from .mixing import (
    DirichletLaplace,
    Exponential,
    InverseGamma,
    LogisticKolmogorov,
    MixingLaw,
    PointMass,
    ProductLaw,
)

__all__ = [
    "PROBIT",
    "LOGIT",
    "BinaryDesign",
    "PriorSpec",
    "PosteriorPsun",
    "StandardizeRecord",
    "MarginalLikelihood",
    "log_likelihood",
    "build_posterior",
    "fit_gibbs",
    "fit_exact_iid",
    "log_marginal_likelihood",
    "standardize",
    "prior_from_recipe",
    "predictive_probability",
    "link_log_cdf",
    "LINKS",
    "FAMILIES",
]

PROBIT = "probit"
LOGIT = "logit"
LINKS = (PROBIT, LOGIT)

FAMILIES = ("gaussian", "laplace", "cauchy", "dirichlet-laplace")

COND_LIMIT = 1e10


def _check_link(link: str) -> str:
    link = str(link).lower()
    if link not in LINKS:
        raise ValueError(f"link must be one of {LINKS}, got {link!r}")
    return link


def link_log_cdf(link: str, x) -> np.ndarray:
    """``log Lambda(x)`` for the standard normal or logistic CDF."""
    x = np.asarray(x, dtype=float)
    if _check_link(link) == PROBIT:
        return special.log_ndtr(x)
    return -np.logaddexp(0.0, -x)


def link_mixing_law(link: str, n: int) -> MixingLaw:
    if _check_link(link) == PROBIT:
        return PointMass(dimension=n, value=1.0)
    return LogisticKolmogorov(dimension=n)


@dataclass(frozen=True, eq=False)
class BinaryDesign:
    """Design matrix, 0/1 response and link."""

    x: np.ndarray
    y: np.ndarray
    link: str = PROBIT
    names: tuple[str, ...] | None = None
    intercept: bool = False

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y).ravel()
        if x.shape[0] != y.size:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.size} entries")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("y must be binary (0/1)")
        start = 1 if self.intercept else 0
        if self.intercept and not np.all(x[:, 0] == 1.0):
            raise ValueError("intercept flag set but first column is not all ones")
        # without the flag a constant column may itself be the intercept
        if self.intercept and x.shape[0] > 1:
            const = np.ptp(x[:, start:], axis=0) == 0
            if np.any(const):
                raise ValueError(f"constant covariate column(s) {np.flatnonzero(const) + start}")
        names = self.names
        if names is not None and len(names) != x.shape[1]:
            raise ValueError("names must match the number of columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "link", _check_link(self.link))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def signs(self) -> np.ndarray:
        """Diagonal of ``B_y = 2 diag(y) - I``."""
        return 2.0 * self.y - 1.0

    @property
    def signed_x(self) -> np.ndarray:
        """``B_y X``."""
        return self.x * self.signs[:, None]

    def with_response(self, y) -> "BinaryDesign":
        return BinaryDesign(self.x, y, self.link, self.names, self.intercept)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """A pSUN prior on ``beta``.

    ``family`` picks the observation-layer mixing law: Gaussian (no mixing),
    Laplace with independent components (exponential scales with rate 1/2),
    Cauchy (inverse-gamma scales, shape = scale = 1/2) or Dirichlet-Laplace.
    ``omega`` is a diagonal vector or, for the Gaussian family, a full matrix.
    A non-zero ``m`` adds a skewing block ``(theta, a_mat, b_vec, q_v)``.
    """

    family: str
    omega: np.ndarray
    xi: np.ndarray | None = None
    m: int = 0
    theta: np.ndarray | None = None
    a_mat: np.ndarray | None = None
    b_vec: np.ndarray | None = None
    q_v: MixingLaw | None = None
    grid_size: int = 300

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim == 1:
            if np.any(omega <= 0):
                raise ValueError("omega diagonal must be positive")
            omega = np.diag(omega)
        p = omega.shape[0]
        if family == "dirichlet-laplace" and not np.array_equal(omega, np.eye(p)):
            raise ValueError("Dirichlet-Laplace prior requires omega = I")
        if family != "gaussian" and np.any(omega - np.diag(np.diag(omega))):
            raise ValueError(f"{family} prior requires a diagonal omega")
        xi = np.zeros(p) if self.xi is None else np.asarray(self.xi, dtype=float).ravel()
        if xi.size != p:
            raise ValueError("xi length must match omega")
        m = int(self.m)
        if m < 0:
            raise ValueError("m must be non-negative")
        theta = np.eye(m) if self.theta is None else np.asarray(self.theta, float).reshape(m, m)
        a_mat = np.zeros((m, p)) if self.a_mat is None else np.asarray(self.a_mat, float).reshape(m, p)
        b_vec = np.zeros(m) if self.b_vec is None else np.asarray(self.b_vec, float).reshape(m)
        q_v = PointMass(dimension=m) if self.q_v is None else self.q_v
        if q_v.dimension != m:
            raise ValueError("q_v dimension must equal m")
        for name, val in (("family", family), ("omega", omega), ("xi", xi), ("m", m),
                          ("theta", theta), ("a_mat", a_mat), ("b_vec", b_vec), ("q_v", q_v)):
            object.__setattr__(self, name, val)

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    def q_w(self) -> MixingLaw:
        p = self.p
        if self.family == "gaussian":
            return PointMass(dimension=p)
        if self.family == "laplace":
            return Exponential(dimension=p, rate=0.5)
        if self.family == "cauchy":
            return InverseGamma(dimension=p, shape=0.5, scale=0.5)
        return DirichletLaplace(dimension=p, grid_size=self.grid_size)

    def params(self) -> PsunParams:
        """The prior itself as a pSUN law."""
        return PsunParams(xi=self.xi, omega=self.omega, q_w=self.q_w(), a_mat=self.a_mat,
                          b_vec=self.b_vec, theta=self.theta, q_v=self.q_v)

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        """Prior draws of ``beta`` (exact when ``m = 0``)."""
        rng = as_generator(rng)
        if self.m:
            from .core import sample_by_rejection

            out = sample_by_rejection(self.params(), 1 if size is None else size, rng)
            return out[0] if size is None else out
        n = 1 if size is None else int(size)
        law = self.q_w()
        sd = np.sqrt(np.diag(self.omega))
        corr = self.omega / np.outer(sd, sd)
        chol = np.linalg.cholesky(corr)
        out = np.empty((n, self.p))
        for i in range(n):
            w = law.sample(rng)
            out[i] = self.xi + sd * np.sqrt(w) * (chol @ rng.standard_normal(self.p))
        return out[0] if size is None else out


@dataclass(frozen=True, eq=False)
class PosteriorPsun:
    params: PsunParams
    design: BinaryDesign
    prior: PriorSpec


def log_likelihood(design: BinaryDesign, beta) -> float:
    """``sum_i log Lambda((2 y_i - 1) x_i' beta)``."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != design.p:
        raise ValueError(f"beta must have length {design.p}")
    return float(np.sum(link_log_cdf(design.link, design.signed_x @ beta)))


def build_posterior(design: BinaryDesign, prior: PriorSpec) -> PosteriorPsun:
    """Assemble the conjugate pSUN posterior.

    The likelihood block of the conditioning matrix is ``B_y X diag^{1/2}(Omega)``
    because ``beta = xi + diag^{1/2}(Omega) Z``; the offsets are ``B_y X xi``.
    """
    if design.p != prior.p:
        raise ValueError(f"design has p={design.p} but prior has p={prior.p}")
    n, m = design.n, prior.m
    bx = design.signed_x
    sd = np.sqrt(np.diag(prior.omega))
    a_star = np.vstack([prior.a_mat, bx * sd[None, :]])
    b_star = np.concatenate([prior.b_vec, bx @ prior.xi])
    theta_star = linalg.block_diag(prior.theta, np.eye(n)) if m else np.eye(n)
    q_v = ProductLaw.of(prior.q_v, link_mixing_law(design.link, n))
    params = PsunParams(xi=prior.xi, omega=prior.omega, q_w=prior.q_w(), a_mat=a_star,
                        b_vec=b_star, theta=theta_star, q_v=q_v)
    return PosteriorPsun(params=params, design=design, prior=prior)


def fit_gibbs(design: BinaryDesign, prior: PriorSpec, config: ChainConfig) -> DrawMatrix:
    """Posterior draws of ``beta`` from the blocked Gibbs sampler."""
    post = build_posterior(design, prior)
    out = sample_chains(post.params, config)
    out.names = list(design.names) if design.names else None
    out.config["link"] = design.link
    out.config["family"] = prior.family
    return out


G2_LAWS = ("logistic", "gaussian")


def fit_exact_iid(design: BinaryDesign, n_draws: int, rng, g2_star: str = "logistic",
                  scale: float = 1.0, seed: int | None = None) -> DrawMatrix:
    """I.i.d. posterior draws when ``X X'`` is invertible.

    The prior is ``beta = X'(XX')^{-1} U`` with ``U`` made of independent
    symmetric components ``scale * G``, ``G`` standard logistic or Gaussian.
    Each posterior component of ``U`` is drawn by reflection: draw ``h`` from
    its prior and ``k`` from the link CDF, keep ``h`` if ``k <= s_i h`` and
    return ``-h`` otherwise.
    """
    rng = as_generator(rng)
    if g2_star not in G2_LAWS:
        raise ValueError(f"g2_star must be one of {G2_LAWS}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    x = design.x
    n = design.n
    if n > design.p:
        raise ValueError("X X' is singular when n > p")
    gram = x @ x.T
    if np.linalg.cond(gram) > COND_LIMIT:
        raise np.linalg.LinAlgError("X X' is singular beyond the conditioning threshold")
    h = scale * (rng.logistic(size=(n_draws, n)) if g2_star == "logistic"
                 else rng.standard_normal((n_draws, n)))
    k = rng.standard_normal((n_draws, n)) if design.link == PROBIT else rng.logistic(size=(n_draws, n))
    s = design.signs
    u = np.where(k <= s * h, h, -h)
    beta = linalg.solve(gram, u.T, assume_a="pos").T @ x
    return DrawMatrix(draws=beta, chain=np.zeros(n_draws, dtype=np.int64),
                      seed=-1 if seed is None else seed,
                      config=dict(method="exact-iid", g2_star=g2_star, scale=scale),
                      names=list(design.names) if design.names else None)


@dataclass(frozen=True)
class MarginalLikelihood:
    log_value: float
    se_log: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    @property
    def se(self) -> float:
        return self.value * self.se_log

    def as_dict(self) -> dict:
        return {"log_marginal_likelihood": self.log_value, "se_log": self.se_log,
                "marginal_likelihood": self.value, "se": self.se}


def log_marginal_likelihood(design: BinaryDesign, prior: PriorSpec, n_mc: int = 4000,
                            rng=None, inner_mc: int = 64) -> MarginalLikelihood:
    """``log P(Y = y)`` as the ratio of posterior and prior normalisers.

    With ``m = 0`` the prior normaliser is one and ``P(Y = y)`` is the
    posterior's ``Psi``. Mixing variables are averaged by Monte Carlo and the
    Gaussian layer is integrated exactly or by tilted importance sampling.
    """
    rng = as_generator(rng)
    post = build_posterior(design, prior)
    lp, se = log_psi_estimate(post.params, n_mc, rng, inner_mc=inner_mc, use_cache=False)
    if prior.m:
        lp0, se0 = log_psi_estimate(prior.params(), n_mc, rng, inner_mc=inner_mc,
                                    use_cache=False)
        lp -= lp0
        se = math.hypot(se, se0)
    return MarginalLikelihood(log_value=float(lp), se_log=float(se))


@dataclass(frozen=True)
class StandardizeRecord:
    means: np.ndarray
    scales: np.ndarray
    target_sd: float
    intercept: bool

    def apply(self, x_raw) -> np.ndarray:
        x = (np.atleast_2d(np.asarray(x_raw, dtype=float)) - self.means) / self.scales * self.target_sd
        if self.intercept:
            x = np.column_stack([np.ones(x.shape[0]), x])
        return x

    def as_dict(self) -> dict:
        return {"means": self.means.tolist(), "scales": self.scales.tolist(),
                "target_sd": self.target_sd, "intercept": self.intercept}


def standardize(x_raw, add_intercept: bool = True, target_sd: float = 0.5
                ) -> tuple[np.ndarray, StandardizeRecord]:
    """Centre each column and scale it to ``target_sd`` (sample SD, ``n - 1``)."""
    x_raw = np.atleast_2d(np.asarray(x_raw, dtype=float))
    if x_raw.shape[0] < 2:
        raise ValueError("need at least two rows to standardize")
    means = x_raw.mean(axis=0)
    scales = x_raw.std(axis=0, ddof=1)
    if np.any(scales == 0):
        raise ValueError(f"constant column(s) {np.flatnonzero(scales == 0).tolist()}")
    rec = StandardizeRecord(means=means, scales=scales, target_sd=float(target_sd),
                            intercept=bool(add_intercept))
    return rec.apply(x_raw), rec


# intercept and slope variances of the weakly informative recipes
RECIPES = {
    (PROBIT, "gaussian"): (100.0, 42.25),
    (PROBIT, "laplace"): (100.0, 6.25),
    (LOGIT, "gaussian"): (256.0, 25.0),
    (LOGIT, "laplace"): (210.25, 14.0625),
}
SAGE_GAUSSIAN_VARIANCE = 16.0


def prior_from_recipe(link: str, family: str, p: int, intercept: bool = True) -> PriorSpec:
    """Default prior for a link and family.

    ``family`` is ``gaussian``, ``laplace``, ``dirichlet-laplace`` or
    ``gaussian-sage`` (all variances 16). The Cauchy family has no default
    scale and must be built with an explicit ``omega``.
    """
    link = _check_link(link)
    family = str(family).lower()
    if p < 1:
        raise ValueError("p must be >= 1")
    if family == "cauchy":
        raise ValueError("the Cauchy prior has no default scale; supply omega explicitly")
    if family == "dirichlet-laplace":
        return PriorSpec(family=family, omega=np.ones(p))
    if family == "gaussian-sage":
        return PriorSpec(family="gaussian", omega=np.full(p, SAGE_GAUSSIAN_VARIANCE))
    if (link, family) not in RECIPES:
        raise ValueError(f"unknown prior family {family!r}")
    first, rest = RECIPES[(link, family)]
    omega = np.full(p, rest)
    if intercept:
        omega[0] = first
    return PriorSpec(family=family, omega=omega)


def predictive_probability(draws, x_new, link: str) -> np.ndarray:
    """Posterior predictive ``P(y* = 1 | x*)`` as the draw average of ``Lambda(x*' beta)``."""
    draws = np.asarray(draws.draws if isinstance(draws, DrawMatrix) else draws, dtype=float)
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    return np.exp(link_log_cdf(link, x_new @ draws.T)).mean(axis=1)
