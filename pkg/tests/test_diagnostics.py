from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psun.diagnostics import (
    ConstantSeriesError,
    acf,
    ess,
    quantiles,
    split_rhat,
    summarize,
)


def ar1(phi, n, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1 - phi * phi)
    e = rng.standard_normal(n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    return x


def test_acf_iid(rng):
    r = acf(rng.standard_normal(100_000), 5)
    assert r[0] == 1.0
    assert abs(r[1]) < 0.01


def test_acf_ar1(rng):
    assert acf(ar1(0.9, 50_000, rng), 3)[1] == pytest.approx(0.9, abs=0.02)


def test_acf_matches_direct_formula(rng):
    x = rng.standard_normal(200)
    xc = x - x.mean()
    direct = [np.sum(xc[: x.size - k] * xc[k:]) / np.sum(xc * xc) for k in range(6)]
    assert np.allclose(acf(x, 5), direct, atol=1e-12)


def test_ess_iid_and_ar1(rng):
    n = 10_000
    assert 0.9 * n <= ess(rng.standard_normal(n)) <= n
    target = 100_000 * 0.1 / 1.9
    assert ess(ar1(0.9, 100_000, rng)) == pytest.approx(target, rel=0.2)


def test_constant_series():
    with pytest.raises(ConstantSeriesError):
        acf(np.ones(100), 5)
    with pytest.raises(ConstantSeriesError):
        ess(np.ones(100))


@given(arrays(float, st.integers(100, 400), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=40, deadline=None)
def test_ess_bounded(x):
    if np.ptp(x) == 0:
        return
    e = ess(x)
    assert 0 < e <= x.size


def test_quantile_type7():
    x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    s = np.sort(x)
    # type 7: h = (n - 1) p, linear between order statistics
    for p in (0.05, 0.25, 0.5, 0.8):
        h = (x.size - 1) * p
        lo = int(np.floor(h))
        expected = s[lo] + (h - lo) * (s[min(lo + 1, 4)] - s[lo])
        assert quantiles(x, [p])[0] == pytest.approx(expected, abs=1e-14)


@given(arrays(float, st.integers(2, 50), elements=st.floats(-1e6, 1e6)))
@settings(max_examples=50, deadline=None)
def test_quantiles_monotone(x):
    q = quantiles(x)
    assert np.all(np.diff(q) >= 0)


def test_split_rhat(rng):
    chains = [rng.standard_normal(2000) for _ in range(3)]
    assert split_rhat(chains) == pytest.approx(1.0, abs=0.01)
    assert split_rhat([rng.standard_normal(2000), rng.standard_normal(2000) + 3]) > 1.5


def test_summary_schema_and_determinism(rng):
    draws = rng.standard_normal((1000, 2))
    chain = np.repeat([0, 1], 500)
    a = summarize(draws, chain, names=["a", "b"])
    b = summarize(draws.copy(), chain, names=["a", "b"])
    assert a.to_json() == b.to_json()
    rec = json.loads(a.to_json())["coefficients"][0]
    for key in ("coefficient", "mean", "sd", "q05", "q50", "q95", "ess", "mcse", "acf", "rhat"):
        assert key in rec
    assert rec["coefficient"] == "a"
    assert rec["ess"] <= 1000
    assert rec["mcse"] == pytest.approx(rec["sd"] / np.sqrt(rec["ess"]))


def test_summary_constant_column():
    s = summarize(np.column_stack([np.zeros(200), np.arange(200.0)]))
    assert s.coefficients[0].sd == 0.0 and s.coefficients[0].mcse == 0.0
