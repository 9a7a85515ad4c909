from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from psun import lk


def test_density_integrates_to_one():
    val = sum(integrate.quad(lk.lk_density, a, b, epsabs=1e-13, limit=200)[0]
              for a, b in ((0, 0.5), (0.5, lk.V_STAR), (lk.V_STAR, 20), (20, np.inf)))
    assert val == pytest.approx(1.0, abs=1e-8)


def test_branches_agree_at_switch_point():
    for v in (0.8, 1.2, lk.V_STAR, 3.0, 4.0):
        assert lk._log_lk_small(v) == pytest.approx(lk._log_lk_large(v), abs=1e-10)


@pytest.mark.parametrize("v", [0.05, 0.3, 1.0, 2.5, 8.0, 40.0])
def test_cdf_matches_scipy_kolmogorov(v):
    assert lk.lk_cdf(v) == pytest.approx(stats.kstwobign.cdf(math.sqrt(v) / 2), abs=1e-12)


def test_cdf_is_integral_of_density():
    v = 3.3
    val = integrate.quad(lk.lk_density, 0, v, epsabs=1e-13, points=[lk.V_STAR])[0]
    assert lk.lk_cdf(v) == pytest.approx(val, abs=1e-9)


def test_density_rejects_nonpositive():
    with pytest.raises(ValueError):
        lk.lk_density(0.0)


@pytest.mark.parametrize("a, expected", [(0.0, 1.99), (2.0, 1.99), (3.0, 2.17),
                                         (4.0, 1.8982 + 0.0624 + 0.5584),
                                         (10.0, 0.4982 + 4.376 + 0.12),
                                         (100.0, -0.3201 + 49.86)])
def test_alpha_schedule(a, expected):
    assert lk.alpha_for_t(a) == pytest.approx(expected, abs=1e-12)


def test_alpha_schedule_rejects_negative():
    with pytest.raises(ValueError):
        lk.alpha_for_t(-1.0)


@given(st.floats(1.5, 500.0))
@settings(max_examples=60, deadline=None)
def test_envelope_bounds_density_ratio(alpha):
    # lk(v) / IG(v; alpha, gamma) never exceeds m_star on a dense grid
    v = np.geomspace(1e-2, 5e3, 4000)
    log_ratio = lk.lk_log_density(v) - stats.invgamma.logpdf(v, alpha, scale=lk.GAMMA)
    assert np.max(log_ratio) <= lk.log_m_star(alpha) + 1e-9


@given(st.floats(-3000.0, 3000.0))
@settings(max_examples=40, deadline=None)
def test_acceptance_probability_in_unit_interval(t):
    p = lk.acceptance_probability(t)
    assert 0.0 < p <= 1.0


def test_conditional_sampler_matches_posterior(rng):
    # V | T = t has density proportional to lk(v) N(t; 0, v)
    t = 1.7
    draws = lk.sample_v_given_t(np.full(40_000, t), rng)

    def post(v):
        return lk.lk_density(v) * stats.norm.pdf(t, scale=math.sqrt(v))

    z = integrate.quad(post, 0, np.inf, limit=200)[0]
    for q in (1.0, 3.0, 8.0):
        cdf = integrate.quad(post, 0, q, limit=200)[0] / z
        assert np.mean(draws <= q) == pytest.approx(cdf, abs=4 * math.sqrt(cdf * (1 - cdf) / draws.size) + 1e-3)


def test_prior_sampler_moments(rng):
    v = lk.sample_lk(50_000, rng)
    assert v.mean() == pytest.approx(math.pi ** 2 / 3, rel=0.03)


def test_scalar_and_vector_shapes(rng):
    assert isinstance(lk.sample_v_given_t(0.3, rng), float)
    assert lk.sample_v_given_t(np.zeros((2, 3)), rng).shape == (2, 3)
    v, trials = lk.sample_v_given_t(0.0, rng, return_trials=True)
    assert v > 0 and trials >= 1


def test_nonfinite_t_rejected(rng):
    with pytest.raises(ValueError):
        lk.sample_v_given_t(np.inf, rng)
