"""Chain diagnostics: autocorrelation, effective sample size, summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_LEVELS",
    "acf",
    "ess",
    "quantiles",
    "ChainSummary",
    "CoefficientSummary",
    "summarize",
    "split_rhat",
    "summary_from_json",
    "ConstantSeriesError",
]

DEFAULT_LEVELS = tuple(round(0.05 * j, 2) for j in range(1, 20))


class ConstantSeriesError(ValueError):
    """Autocorrelation is undefined for a constant series."""


def acf(draws, max_lag: int = 50) -> np.ndarray:
    """Autocorrelations ``r_0 .. r_max_lag`` with the biased (1/N) normalisation."""
    x = np.asarray(draws, dtype=float).ravel()
    n = x.size
    if n <= max_lag:
        raise ValueError(f"need more than {max_lag} draws, got {n}")
    x = x - x.mean()
    c0 = float(x @ x)
    if c0 == 0.0:
        raise ConstantSeriesError("constant series has no autocorrelation")
    # FFT autocovariance, zero-padded to avoid wrap-around
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    ac = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    out = ac / c0
    out[0] = 1.0
    return out


def ess(draws) -> float:
    """Geyer initial-positive-sequence effective sample size, clipped to N."""
    x = np.asarray(draws, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 draws")
    rho = acf(x, n - 1)
    # sums of adjacent pairs are positive for reversible chains; stop at the first non-positive
    npairs = n // 2
    gam = rho[0: 2 * npairs: 2] + rho[1: 2 * npairs: 2]
    total = 0.0
    for g in gam:
        if g <= 0:
            break
        total += g
    tau = -1.0 + 2.0 * total
    if tau <= 0:
        return float(n)
    return float(min(n, n / tau))


def quantiles(draws, levels=DEFAULT_LEVELS) -> np.ndarray:
    """Linear interpolation of order statistics at ``(n - 1) * level`` (type 7)."""
    return np.quantile(np.asarray(draws, dtype=float), np.asarray(levels, dtype=float),
                       axis=0, method="linear")


def split_rhat(chains: list[np.ndarray]) -> float:
    """Between/within variance ratio over chain halves."""
    halves = []
    for c in chains:
        c = np.asarray(c, dtype=float).ravel()
        h = c.size // 2
        if h < 2:
            return math.nan
        halves += [c[:h], c[h: 2 * h]]
    n = min(h.size for h in halves)
    arr = np.array([h[:n] for h in halves])
    w = arr.var(axis=1, ddof=1).mean()
    b = n * arr.mean(axis=1).var(ddof=1)
    if w == 0:
        return math.nan
    return float(math.sqrt(((n - 1) / n * w + b / n) / w))


def _level_key(level: float) -> str:
    return f"q{int(round(level * 100)):02d}"


@dataclass
class CoefficientSummary:
    coefficient: str
    mean: float
    sd: float
    quantiles: dict
    ess: float
    mcse: float
    acf: list
    rhat: float | None = None

    def as_record(self) -> dict:
        rec = {"coefficient": self.coefficient, "mean": self.mean, "sd": self.sd}
        rec.update(self.quantiles)
        rec.update({"ess": self.ess, "mcse": self.mcse})
        rec["acf"] = self.acf
        if self.rhat is not None:
            rec["rhat"] = self.rhat
        return rec


@dataclass
class ChainSummary:
    coefficients: list[CoefficientSummary]
    n_draws: int
    n_chains: int
    levels: tuple

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def as_dict(self) -> dict:
        return {"n_draws": self.n_draws, "n_chains": self.n_chains,
                "levels": list(self.levels),
                "coefficients": [c.as_record() for c in self.coefficients]}

    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.coefficients])

    def mcses(self) -> np.ndarray:
        return np.array([c.mcse for c in self.coefficients])


def summarize(draws, chain=None, names=None, levels=DEFAULT_LEVELS, max_lag: int = 50
              ) -> ChainSummary:
    """Per-coefficient mean, sd, quantiles, ESS, MC standard error and ACF.

    With several chains the ESS is the sum of per-chain values and the ACF is
    averaged over chains.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] == 1 and draws.shape[1] > 1 and chain is None:
        draws = draws.T
    n, p = draws.shape
    chain = np.zeros(n, dtype=int) if chain is None else np.asarray(chain)
    ids = np.unique(chain)
    names = [f"beta{j + 1}" for j in range(p)] if names is None else list(names)
    qs = quantiles(draws, levels)
    out = []
    for j in range(p):
        col = draws[:, j]
        parts = [col[chain == c] for c in ids]
        sd = float(col.std(ddof=1)) if n > 1 else 0.0
        if sd > 0 and min(len(x) for x in parts) > max(max_lag, 3):
            e = float(min(n, sum(ess(x) for x in parts)))
            lag = min(max_lag, min(len(x) for x in parts) - 1)
            r = np.mean([acf(x, lag) for x in parts], axis=0).tolist()
        else:
            e = float(n)
            r = [1.0]
        rhat = split_rhat(parts) if len(parts) > 1 and sd > 0 else None
        out.append(CoefficientSummary(
            coefficient=names[j], mean=float(col.mean()), sd=sd,
            quantiles={_level_key(lv): float(qs[i, j]) for i, lv in enumerate(levels)},
            ess=e, mcse=sd / math.sqrt(e), acf=r, rhat=rhat))
    return ChainSummary(coefficients=out, n_draws=n, n_chains=len(ids), levels=tuple(levels))


def summary_from_json(text: str) -> dict:
    return json.loads(text)

