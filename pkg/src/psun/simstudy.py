"""Frequentist coverage of one-sided posterior credible bounds.

For each replicate a design is simulated, then for every (link, prior)
combination a prior scale is drawn, a true coefficient vector is drawn from
that prior, responses are simulated, and the model is refitted under the
same prior. Coverage at level ``g`` is the share of replicates in which the
true coefficient lies below the posterior ``g``-quantile; under a correctly
specified prior and an exact sampler it converges to ``g``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._numerics import as_generator
from .core import ChainConfig
from .diagnostics import DEFAULT_LEVELS, quantiles
from .regression import (
    LOGIT,
    PROBIT,
    BinaryDesign,
    PriorSpec,
    fit_gibbs,
    link_log_cdf,
    prior_from_recipe,
    standardize,
)

__all__ = [
    "DEFAULT_COMBOS",
    "StudyConfig",
    "CoverageTable",
    "wishart_sample",
    "simulate_replicate",
    "run_study",
]

DEFAULT_COMBOS = (
    (LOGIT, "gaussian"),
    (LOGIT, "laplace"),
    (LOGIT, "dirichlet-laplace"),
    (PROBIT, "laplace"),
    (PROBIT, "dirichlet-laplace"),
)

MAX_FAILURE_RATE = 0.01


def wishart_sample(target_mean, rng) -> np.ndarray:
    """Wishart draw with ``p + 1`` degrees of freedom and mean ``target_mean``."""
    target = np.atleast_2d(np.asarray(target_mean, dtype=float))
    p = target.shape[0]
    if target.shape != (p, p) or np.max(np.abs(target - target.T)) > 1e-12 * np.abs(target).max():
        raise ValueError("target_mean must be a symmetric square matrix")
    try:
        np.linalg.cholesky(target)
    except np.linalg.LinAlgError as exc:
        raise ValueError("target_mean must be positive definite") from exc
    df = p + 1
    draw = stats.wishart(df=df, scale=target / df).rvs(random_state=as_generator(rng))
    return np.atleast_2d(draw)


@dataclass(frozen=True)
class StudyConfig:
    g_reps: int = 500
    n: int = 25
    p: int = 10
    combos: tuple = DEFAULT_COMBOS
    gibbs_iters: int = 10_000
    burnin: int = 1_000
    quantile_levels: tuple = DEFAULT_LEVELS
    seed: int = 0
    #: variances (intercept, slopes) for combinations without a recipe, e.g. Cauchy
    omega_overrides: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        lv = np.asarray(self.quantile_levels, float)
        if lv.size == 0 or np.any(np.diff(lv) <= 0) or lv[0] <= 0 or lv[-1] >= 1:
            raise ValueError("quantile_levels must be strictly increasing inside (0, 1)")
        if self.g_reps < 1 or self.n < 1 or self.p < 2:
            raise ValueError("need g_reps >= 1, n >= 1 and p >= 2")
        combos = tuple((str(l).lower(), str(f).lower()) for l, f in self.combos)
        object.__setattr__(self, "combos", combos)
        object.__setattr__(self, "quantile_levels", tuple(float(x) for x in lv))
        ChainConfig(iters=self.gibbs_iters, burnin=self.burnin)

    def target_variances(self, link: str, family: str) -> np.ndarray:
        key = f"{link}-{family}"
        if key in self.omega_overrides or (link, family) in self.omega_overrides:
            first, rest = self.omega_overrides.get(key, self.omega_overrides.get((link, family)))
            out = np.full(self.p, float(rest))
            out[0] = float(first)
            return out
        return np.diag(prior_from_recipe(link, family, self.p).omega).copy()


def _draw_prior(config: StudyConfig, link: str, family: str, rng) -> PriorSpec:
    if family == "dirichlet-laplace":
        return PriorSpec(family=family, omega=np.ones(config.p))
    target = np.diag(config.target_variances(link, family))
    sigma = wishart_sample(target, rng)
    if family == "gaussian":
        return PriorSpec(family=family, omega=0.5 * (sigma + sigma.T))
    return PriorSpec(family=family, omega=np.diag(sigma).copy())


def simulate_design(config: StudyConfig, rng) -> np.ndarray:
    """Intercept plus ``p - 1`` standard normal columns rescaled to sd 0.5."""
    raw = rng.standard_normal((config.n, config.p - 1))
    x, _ = standardize(raw, add_intercept=True, target_sd=0.5)
    return x


def simulate_replicate(config: StudyConfig, g: int) -> dict:
    """Run every combination for replicate ``g``; returns indicator arrays.

    Each replicate owns a stream derived from ``(seed, g)`` so results do not
    depend on execution order.
    """
    seq = np.random.SeedSequence([config.seed, g])
    rng = np.random.default_rng(seq)
    x = simulate_design(config, rng)
    out = {}
    for h, (link, family) in enumerate(config.combos):
        sub = np.random.default_rng(np.random.SeedSequence([config.seed, g, h]))
        try:
            prior = _draw_prior(config, link, family, sub)
            beta = prior.sample(sub)
            prob = np.exp(link_log_cdf(link, x @ beta))
            y = (sub.random(config.n) < prob).astype(int)
            design = BinaryDesign(x, y, link, intercept=True)
            chain_seed = int(sub.integers(2 ** 63 - 1))
            draws = fit_gibbs(design, prior, ChainConfig(iters=config.gibbs_iters,
                                                         burnin=config.burnin, seed=chain_seed))
            q = quantiles(draws.draws, config.quantile_levels)
            out[(link, family)] = (beta[None, :] <= q)
        except Exception as exc:  # recorded and counted, see CoverageTable.failures
            out[(link, family)] = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class CoverageTable:
    levels: tuple
    combos: tuple
    intercept: dict
    others: dict
    intercept_se: dict
    others_se: dict
    n_ok: dict
    failures: dict
    seconds: float = 0.0

    def failure_rate(self, combo) -> float:
        tot = self.n_ok[combo] + len(self.failures[combo])
        return len(self.failures[combo]) / tot if tot else 0.0

    @property
    def ok(self) -> bool:
        return all(self.failure_rate(c) < MAX_FAILURE_RATE for c in self.combos)

    def rows(self):
        for c in self.combos:
            for group, cov, se in (("intercept", self.intercept, self.intercept_se),
                                   ("others", self.others, self.others_se)):
                yield c, group, cov[c], se[c]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = [f"q{int(round(lv * 100)):02d}" for lv in self.levels]
        w.writerow(["link", "family", "group", "stat", "n_reps"] + keys)
        for (link, family), group, cov, se in self.rows():
            n = self.n_ok[(link, family)]
            w.writerow([link, family, group, "coverage", n] + [f"{v:.6f}" for v in cov])
            w.writerow([link, family, group, "se", n] + [f"{v:.6f}" for v in se])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "seconds": self.seconds,
            "combos": [
                {"link": c[0], "family": c[1], "n_ok": self.n_ok[c],
                 "failures": self.failures[c],
                 "intercept": self.intercept[c].tolist(), "intercept_se": self.intercept_se[c].tolist(),
                 "others": self.others[c].tolist(), "others_se": self.others_se[c].tolist()}
                for c in self.combos],
        }


def run_study(config: StudyConfig, progress=None) -> CoverageTable:
    """Simulate ``g_reps`` replicates and tabulate coverage per combination."""
    t0 = time.perf_counter()
    reps = range(config.g_reps)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(simulate_replicate, [config] * config.g_reps, reps))
    else:
        results = []
        for g in reps:
            results.append(simulate_replicate(config, g))
            if progress is not None:
                progress(g + 1, config.g_reps)
    levels = config.quantile_levels
    inter, others, inter_se, others_se, n_ok, failures = {}, {}, {}, {}, {}, {}
    for c in config.combos:
        hits = [r[c] for r in results if not isinstance(r[c], str)]
        failures[c] = [f"rep {g}: {r[c]}" for g, r in enumerate(results) if isinstance(r[c], str)]
        n_ok[c] = len(hits)
        if hits:
            arr = np.array(hits, dtype=float)  # reps x levels x p
            a0 = arr[:, :, 0]
            a1 = arr[:, :, 1:].mean(axis=2)
            inter[c] = a0.mean(axis=0)
            others[c] = a1.mean(axis=0)
            inter_se[c] = np.sqrt(inter[c] * (1 - inter[c]) / len(hits))
            others_se[c] = a1.std(axis=0, ddof=1) / math.sqrt(len(hits)) if len(hits) > 1 \
                else np.full(len(levels), math.nan)
        else:
            nan = np.full(len(levels), math.nan)
            inter[c] = others[c] = inter_se[c] = others_se[c] = nan
    return CoverageTable(levels=levels, combos=config.combos, intercept=inter, others=others,
                         intercept_se=inter_se, others_se=others_se, n_ok=n_ok,
                         failures=failures, seconds=time.perf_counter() - t0)
