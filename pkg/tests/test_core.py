from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from psun.core import (
    ChainConfig,
    GibbsSampler,
    PsunParams,
    clear_psi_cache,
    initial_state,
    log_psi_estimate,
    psi_estimate,
    psun_log_density,
    sample_by_rejection,
    sample_chain,
    sample_chains,
)
from psun.mixing import (
    DirichletLaplace,
    Exponential,
    InverseGamma,
    LogisticKolmogorov,
    PointMass,
    ProductLaw,
    UnsupportedLawError,
)


def skew_normal(alpha=1.0, omega=1.0):
    return PsunParams(xi=[0.0], omega=[[omega]], q_w=PointMass(dimension=1),
                      a_mat=[[alpha]], b_vec=[0.0], theta=[[1.0]], q_v=PointMass(dimension=1))


def test_skew_normal_density_exact():
    par = skew_normal(alpha=2.0)
    for y in (-2.0, -0.3, 0.0, 0.7, 3.0):
        lf, se = psun_log_density(par, [y])
        assert se == 0.0
        assert lf == pytest.approx(stats.skewnorm.logpdf(y, 2.0), abs=1e-12)


def test_m_zero_has_unit_psi():
    par = PsunParams(xi=[1.0, 2.0], omega=np.eye(2), q_w=Exponential(dimension=2),
                     a_mat=np.zeros((0, 2)), b_vec=np.zeros(0), theta=np.zeros((0, 0)),
                     q_v=PointMass(dimension=0))
    assert log_psi_estimate(par) == (0.0, 0.0)
    lf, se = psun_log_density(par, [1.5, 1.0])
    assert lf == pytest.approx(stats.laplace.logpdf(0.5) + stats.laplace.logpdf(-1.0))


def _mixed_instance():
    return PsunParams(xi=[0.2], omega=[[1.5]], q_w=Exponential(dimension=1),
                      a_mat=[[1.0], [-0.5]], b_vec=[0.3, 0.1], theta=np.eye(2),
                      q_v=LogisticKolmogorov(dimension=2))


def test_density_integrates_to_one(rng):
    par = _mixed_instance()
    clear_psi_cache()
    lp, se_p = log_psi_estimate(par, n_mc=20_000, rng=rng)

    def f(y):
        # same n_mc hits the cached Psi, so only the normaliser carries MC error
        lf, se = psun_log_density(par, [y], n_mc=20_000, rng=rng)
        assert se == pytest.approx(se_p)
        return math.exp(lf)

    mass = integrate.quad(f, -30, 30, limit=200, points=[0.2])[0]
    assert mass == pytest.approx(1.0, abs=4 * se_p)


def test_gibbs_matches_rejection_skew_normal():
    par = skew_normal(alpha=-3.0, omega=2.0)
    dm = sample_chain(par, iters=40_000, burnin=500, thin=2, seed=4)
    ref = stats.skewnorm(-3.0, scale=math.sqrt(2.0))
    assert stats.kstest(dm.draws[:, 0], ref.cdf).pvalue > 1e-3


@pytest.mark.parametrize("make", [
    _mixed_instance,
    lambda: PsunParams(xi=[0.0, 1.0], omega=[[1.0, 0.6], [0.6, 2.0]],
                       q_w=InverseGamma(dimension=2, shape=2.0, scale=2.0, shared_scale=True),
                       a_mat=[[1.0, 0.5]], b_vec=[-0.2], theta=[[1.0]],
                       q_v=PointMass(dimension=1)),
    lambda: PsunParams(xi=[0.0, 0.0], omega=np.eye(2), q_w=DirichletLaplace(dimension=2),
                       a_mat=[[1.0, 1.0]], b_vec=[0.0], theta=[[1.0]],
                       q_v=PointMass(dimension=1)),
])
def test_gibbs_matches_rejection(make, rng):
    par = make()
    ref = sample_by_rejection(par, 6000, rng)
    dm = sample_chain(par, iters=60_000, burnin=2000, thin=10, seed=9)
    for j in range(par.d):
        assert stats.ks_2samp(dm.draws[:, j], ref[:, j]).pvalue > 1e-3


def test_psi_estimate_mixture_vs_rejection(rng):
    par = _mixed_instance()
    clear_psi_cache()
    p, se = psi_estimate(par, n_mc=4000, rng=rng)
    # fraction of prior (Z, T) pairs that satisfy the constraint
    n = 200_000
    w = rng.exponential(2.0, n)
    z = np.sqrt(w) * rng.standard_normal(n)
    from psun.lk import sample_lk
    v = sample_lk(2 * n, rng).reshape(n, 2)
    t = np.sqrt(v) * rng.standard_normal((n, 2))
    ok = np.all(t <= np.column_stack([z, -0.5 * z]) + np.array([0.3, 0.1]), axis=1)
    frac = ok.mean()
    assert p == pytest.approx(frac, abs=4 * math.hypot(se, math.sqrt(frac * (1 - frac) / n)))


def test_psi_cache(rng):
    par = _mixed_instance()
    clear_psi_cache()
    a = log_psi_estimate(par, n_mc=300, rng=1)
    b = log_psi_estimate(par, n_mc=300, rng=2)
    assert a == b
    c = log_psi_estimate(par, n_mc=300, rng=2, use_cache=False)
    assert c != a


def test_chains_are_deterministic():
    par = _mixed_instance()
    a = sample_chains(par, ChainConfig(iters=300, burnin=50, chains=2, seed=3))
    b = sample_chains(par, ChainConfig(iters=300, burnin=50, chains=2, seed=3))
    assert np.array_equal(a.draws, b.draws)
    assert a.draws.shape == (500, 1) and a.n_chains == 2
    assert not np.array_equal(a.by_chain()[0], a.by_chain()[1])


def test_keep_scales():
    dm = sample_chain(_mixed_instance(), iters=100, keep_scales=True)
    assert dm.w_trace.shape == (100, 1) and dm.v_trace.shape == (100, 2)
    assert np.all(dm.w_trace > 0)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2 ** 31))
@settings(max_examples=25, deadline=None)
def test_gibbs_state_satisfies_constraint(d, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, d))
    b = rng.normal(0, 1, m)
    par = PsunParams(xi=rng.standard_normal(d), omega=np.diag(rng.uniform(0.5, 2, d)),
                     q_w=Exponential(dimension=d), a_mat=a, b_vec=b, theta=np.eye(m),
                     q_v=ProductLaw.of(PointMass(dimension=1), LogisticKolmogorov(dimension=m - 1)))
    sampler = GibbsSampler(par)
    state = initial_state(par, rng)
    for _ in range(5):
        state = sampler.step(state, rng)
        assert np.all(state.t <= par.a_mat @ state.z + par.b_vec + 1e-9)
        assert np.allclose(state.y, par.xi + par.omega_sd * state.z)


def test_coordinate_fallback_matches_exact():
    par = PsunParams(xi=[0.0, 0.0], omega=[[1.0, 0.3], [0.3, 1.0]], q_w=PointMass(dimension=2),
                     a_mat=[[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]], b_vec=[0.2, -0.1, 0.4],
                     theta=np.eye(3), q_v=PointMass(dimension=3))
    exact = sample_chain(par, iters=20_000, seed=1)
    gibbs = sample_chain(par, iters=40_000, burnin=1000, thin=2, seed=2, exact_max_dim=1,
                         sweeps=2)
    for j in range(2):
        assert stats.ks_2samp(exact.draws[:, j], gibbs.draws[:, j]).pvalue > 1e-3


def test_validation():
    base = dict(xi=[0.0], omega=[[1.0]], q_w=PointMass(dimension=1), a_mat=[[1.0]],
                b_vec=[0.0], theta=[[1.0]], q_v=PointMass(dimension=1))
    with pytest.raises(ValueError):
        PsunParams(**dict(base, omega=[[-1.0]]))
    with pytest.raises(ValueError):
        PsunParams(**dict(base, theta=[[2.0]]))
    with pytest.raises(ValueError):
        PsunParams(**dict(base, q_w=PointMass(dimension=2)))
    with pytest.raises(ValueError):
        PsunParams(**dict(base, b_vec=[np.nan]))
    with pytest.raises(UnsupportedLawError):
        PsunParams(xi=[0, 0], omega=[[1, 0.5], [0.5, 1]], q_w=Exponential(dimension=2),
                   a_mat=np.zeros((0, 2)), b_vec=np.zeros(0), theta=np.zeros((0, 0)),
                   q_v=PointMass(dimension=0))
    with pytest.raises(ValueError):
        ChainConfig(iters=10, burnin=10)
    with pytest.raises(ValueError):
        ChainConfig(thin=0)


def test_params_are_immutable():
    par = skew_normal()
    with pytest.raises(ValueError):
        par.xi[0] = 1.0
