from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from psun.tmvn import (
    TmvnError,
    TmvnKernel,
    TruncationSpec,
    fit_tilted_proposal,
    mc_region_log_prob,
    sample_tmvn_upper,
)


def _random_cov(rng, k, rho_scale=0.6):
    a = rng.standard_normal((k, k)) * rho_scale
    return a @ a.T + np.eye(k)


def _naive_rejection(spec, n, rng):
    chol = np.linalg.cholesky(spec.sigma)
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.standard_normal((20_000, spec.dim)) @ chol.T
        out.append(x[np.all(x <= spec.upper, axis=1)])
    return np.concatenate(out)[:n]


def test_half_normal(rng):
    x = sample_tmvn_upper(TruncationSpec([0.0, np.inf], np.eye(2)), rng, size=40_000)
    assert x[:, 0].mean() == pytest.approx(-math.sqrt(2 / math.pi), abs=0.01)
    assert np.all(x[:, 0] <= 0)
    assert abs(x[:, 1].mean()) < 0.02


def test_matches_naive_rejection(rng):
    cov = _random_cov(rng, 4)
    spec = TruncationSpec(np.array([0.5, -0.2, 1.0, 0.3]), cov)
    exact = sample_tmvn_upper(spec, rng, size=20_000)
    naive = _naive_rejection(spec, 20_000, rng)
    assert np.all(exact <= spec.upper)
    for j in range(4):
        assert stats.ks_2samp(exact[:, j], naive[:, j]).pvalue > 1e-3


def test_region_probabilities(rng):
    # orthant probabilities with closed forms
    lp, se = mc_region_log_prob(TruncationSpec(np.zeros(3), np.eye(3)), 2000, rng)
    assert lp == pytest.approx(math.log(1 / 8), abs=1e-10)
    rho = 0.5
    cov = np.array([[1, rho], [rho, 1.0]])
    lp, se = mc_region_log_prob(TruncationSpec(np.zeros(2), cov), 20_000, rng)
    exact = 0.25 + math.asin(rho) / (2 * math.pi)
    assert lp == pytest.approx(math.log(exact), abs=4 * se)


def test_deep_tail_probability(rng):
    # P(X <= -10) for a scalar needs no sampling at all from the tilted proposal
    spec = TruncationSpec(np.array([-10.0, -10.0]), np.eye(2))
    lp, _ = mc_region_log_prob(spec, 200, rng)
    assert lp == pytest.approx(2 * stats.norm.logcdf(-10.0), rel=1e-8)
    x = sample_tmvn_upper(spec, rng, size=1000)
    assert np.all(x <= -10.0)


def test_empty_region_rejected(rng):
    spec = TruncationSpec(np.full(2, -60.0), np.eye(2))
    with pytest.raises(TmvnError):
        fit_tilted_proposal(spec)


def test_invalid_specs():
    with pytest.raises(ValueError):
        TruncationSpec(np.zeros(2), np.eye(3))
    with pytest.raises(ValueError):
        TruncationSpec(np.array([0.0, -np.inf]), np.eye(2))
    with pytest.raises(ValueError):
        TruncationSpec(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        TruncationSpec(np.zeros(2), np.array([[1.0, 0.2], [0.3, 1.0]]))


@given(st.integers(2, 12), st.integers(0, 2 ** 31))
@settings(max_examples=30, deadline=None)
def test_draws_respect_bounds(k, seed):
    rng = np.random.default_rng(seed)
    cov = _random_cov(rng, k)
    upper = rng.normal(0, 1.5, k)
    spec = TruncationSpec(upper, cov)
    x = sample_tmvn_upper(spec, rng, size=50)
    assert x.shape == (50, k)
    assert np.all(x <= upper)


def test_singular_covariance(rng):
    # rank-one covariance is handled through the jitter
    v = np.array([1.0, 2.0, -1.0])
    spec = TruncationSpec(np.array([0.0, 1.0, 1.0]), np.outer(v, v))
    x = sample_tmvn_upper(spec, rng, size=200)
    assert np.all(x <= spec.upper)


def test_kernel_fallback_is_stationary(rng):
    # coordinate sweeps started at exact draws keep the exact distribution
    cov = _random_cov(rng, 5, 0.4)
    spec = TruncationSpec(np.array([0.3, 0.0, -0.5, 1.0, 0.2]), cov)
    start = sample_tmvn_upper(spec, rng, size=4000)
    kern = TmvnKernel(exact_max_dim=1, sweeps=1)
    moved = np.array([kern.draw(spec.upper, cov, rng, current=s.copy()) for s in start])
    ref = sample_tmvn_upper(spec, rng, size=4000)
    for j in range(5):
        assert stats.ks_2samp(moved[:, j], ref[:, j]).pvalue > 1e-3


def test_kernel_caches_fixed_sigma(rng):
    kern = TmvnKernel(sigma_fixed=True)
    cov = _random_cov(rng, 3)
    up = np.zeros(3)
    kern.draw(up, cov, rng)
    first = kern._proposal
    kern.draw(up, cov, rng)
    assert kern._proposal is first


def test_kernel_scalar_case(rng):
    kern = TmvnKernel()
    x = np.array([kern.draw(np.array([1.0]), np.array([[4.0]]), rng)[0] for _ in range(20_000)])
    ref = stats.truncnorm(-np.inf, 0.5, scale=2.0)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3
