from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from psun.gausscdf import log_mvn_cdf_exact


def _quad_bvn(h, k, rho):
    # P(X <= h, Y <= k) = int_{-inf}^{h} phi(x) Phi((k - rho x) / sqrt(1 - rho^2)) dx
    s = math.sqrt(1 - rho * rho)
    return integrate.quad(lambda x: stats.norm.pdf(x) * stats.norm.cdf((k - rho * x) / s),
                          -np.inf, h, epsabs=0, epsrel=1e-12, limit=200)[0]


@given(st.floats(-6, 4), st.floats(-6, 4), st.floats(-0.95, 0.95))
@settings(max_examples=60, deadline=None)
def test_bivariate_against_quadrature(h, k, rho):
    got = log_mvn_cdf_exact([h, k], [[1, rho], [rho, 1]])
    ref = _quad_bvn(h, k, rho)
    assert got == pytest.approx(math.log(ref), abs=1e-7)


def test_orthant_closed_forms():
    rho = 0.3
    assert math.exp(log_mvn_cdf_exact([0, 0], [[1, rho], [rho, 1]])) == pytest.approx(
        0.25 + math.asin(rho) / (2 * math.pi), abs=1e-14)
    r = np.array([[1, 0.2, 0.5], [0.2, 1, -0.1], [0.5, -0.1, 1]])
    ref = 1 / 8 + (math.asin(0.2) + math.asin(0.5) + math.asin(-0.1)) / (4 * math.pi)
    assert math.exp(log_mvn_cdf_exact(np.zeros(3), r)) == pytest.approx(ref, abs=1e-11)


def test_trivariate_against_scipy():
    cov = np.array([[2.0, 0.4, 0.3], [0.4, 1.0, -0.2], [0.3, -0.2, 1.5]])
    x = np.array([0.3, -0.4, 1.2])
    ref = stats.multivariate_normal.cdf(x, np.zeros(3), cov, abseps=1e-12, releps=1e-12,
                                        maxpts=10_000_000)
    assert math.exp(log_mvn_cdf_exact(x, cov)) == pytest.approx(ref, rel=1e-6)


def test_infinite_bounds_and_diagonal():
    assert log_mvn_cdf_exact([np.inf, 0.0], [[1, 0.4], [0.4, 1]]) == pytest.approx(math.log(0.5))
    assert log_mvn_cdf_exact([-np.inf, 0.0], np.eye(2)) == -math.inf
    assert log_mvn_cdf_exact([1.0, -2.0], np.diag([4.0, 1.0])) == pytest.approx(
        stats.norm.logcdf(0.5) + stats.norm.logcdf(-2.0))


def test_too_many_dimensions():
    with pytest.raises(ValueError):
        log_mvn_cdf_exact(np.zeros(4), np.eye(4) + 0.1)
