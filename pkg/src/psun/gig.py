"""Generalized inverse Gaussian variates.

Density proportional to ``x**(lam - 1) * exp(-(chi / x + psi * x) / 2)``.
The general case follows Hormann & Leydold's ratio-of-uniforms family
(shifted/unshifted bounding rectangles plus the constant-hat scheme for the
non log-concave corner). ``lam = +-1/2`` goes through the inverse-Gaussian
closed form, and the ``chi = 0`` / ``psi = 0`` boundaries reduce to gamma
and inverse-gamma draws.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._numerics import as_generator

_ZTOL = 10.0 * np.finfo(float).eps


@njit(cache=True)
def _inverse_gaussian(mu, shape, rng):
    # Michael-Schucany-Haas with the root rationalised so huge mu stays exact
    y = rng.standard_normal()
    y = y * y
    r = mu * y / (2.0 * shape)
    x1 = mu / (1.0 + r + math.sqrt(r * r + 2.0 * r))
    if rng.random() <= mu / (mu + x1):
        return x1
    return mu * mu / x1


@njit(cache=True)
def _mode(lam, omega):
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


@njit(cache=True)
def _rou_noshift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + math.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = math.exp(0.5 * (lam + 1.0) * math.log(ym) - s * (ym + 1.0 / ym) - nc)
    while True:
        u = um * rng.random()
        v = rng.random()
        x = u / v
        if math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x


@njit(cache=True)
def _rou_shift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    # extremes of (x - xm) sqrt(f(x)) via Cardano on the depressed cubic
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    fi = math.acos(-q / (2.0 * math.sqrt(-(p * p * p) / 27.0)))
    fak = 2.0 * math.sqrt(-p / 3.0)
    y1 = fak * math.cos(fi / 3.0) - a / 3.0
    y2 = fak * math.cos(fi / 3.0 + 4.0 / 3.0 * math.pi) - a / 3.0
    uplus = (y1 - xm) * math.exp(t * math.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * math.exp(t * math.log(y2) - s * (y2 + 1.0 / y2) - nc)
    while True:
        u = uminus + rng.random() * (uplus - uminus)
        v = rng.random()
        x = u / v + xm
        if x > 0.0 and math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x


@njit(cache=True)
def _constant_hat(lam, omega, rng):
    xm = _mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = math.exp((lam - 1.0) * math.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = math.exp(-omega)
        if lam == 0.0:
            a1 = k1 * math.log(2.0 / (omega * omega))
        else:
            a1 = k1 / lam * ((2.0 / omega) ** lam - x0 ** lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-1.0) / omega
    atot = a0 + a1 + a2
    while True:
        v = atot * rng.random()
        if v <= a0:
            x = x0 * v / a0
            hx = k0
        else:
            v -= a0
            if v <= a1:
                if lam == 0.0:
                    x = omega * math.exp(math.exp(omega) * v)
                    hx = k1 / x
                else:
                    x = (x0 ** lam + lam / k1 * v) ** (1.0 / lam)
                    hx = k1 * x ** (lam - 1.0)
            else:
                v -= a1
                lo = max(x0, 2.0 / omega)
                x = -2.0 / omega * math.log(math.exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v)
                hx = k2 * math.exp(-omega / 2.0 * x)
        u = rng.random() * hx
        if math.log(u) <= (lam - 1.0) * math.log(x) - omega / 2.0 * (x + 1.0 / x):
            return x


@njit(cache=True)
def gig_scalar(lam, chi, psi, rng):
    if chi < _ZTOL:
        return rng.standard_gamma(lam) * 2.0 / psi
    if psi < _ZTOL:
        return chi / 2.0 / rng.standard_gamma(-lam)
    if lam == -0.5:
        return _inverse_gaussian(math.sqrt(chi / psi), chi, rng)
    if lam == 0.5:
        return 1.0 / _inverse_gaussian(math.sqrt(psi / chi), psi, rng)
    a = abs(lam)
    scale = math.sqrt(chi / psi)
    omega = math.sqrt(psi * chi)
    if a > 2.0 or omega > 3.0:
        x = _rou_shift(a, omega, rng)
    elif a >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        x = _rou_noshift(a, omega, rng)
    else:
        x = _constant_hat(a, omega, rng)
    if lam < 0.0:
        return scale / x
    return scale * x


@njit(cache=True)
def _gig_vec(lam, chi, psi, rng):
    out = np.empty(lam.size)
    for i in range(lam.size):
        out[i] = gig_scalar(lam[i], chi[i], psi[i], rng)
    return out


def _check(lam, chi, psi):
    if np.any(chi < 0) or np.any(psi < 0):
        raise ValueError("GIG requires chi >= 0 and psi >= 0")
    if np.any((chi < _ZTOL) & (psi < _ZTOL)):
        raise ValueError("GIG requires chi and psi not both zero")
    if np.any((chi < _ZTOL) & (lam <= 0)):
        raise ValueError("GIG with chi = 0 requires lambda > 0")
    if np.any((psi < _ZTOL) & (lam >= 0)):
        raise ValueError("GIG with psi = 0 requires lambda < 0")


def gig_sample(lam, chi, psi, rng, size=None):
    """Draw GIG(lam, chi, psi) variates; arguments broadcast elementwise."""
    rng = as_generator(rng)
    lam_a, chi_a, psi_a = np.broadcast_arrays(
        np.asarray(lam, float), np.asarray(chi, float), np.asarray(psi, float))
    if size is not None:
        lam_a, chi_a, psi_a = (np.broadcast_to(a, size) for a in (lam_a, chi_a, psi_a))
    _check(lam_a, chi_a, psi_a)
    shape = lam_a.shape
    out = _gig_vec(np.array(lam_a, dtype=float).ravel(), np.array(chi_a, dtype=float).ravel(),
                   np.array(psi_a, dtype=float).ravel(), rng)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def gig_mean(lam: float, chi: float, psi: float) -> float:
    """Closed-form mean via the Bessel ratio (chi, psi > 0)."""
    from scipy.special import kve

    omega = math.sqrt(chi * psi)
    return math.sqrt(chi / psi) * kve(lam + 1, omega) / kve(lam, omega)
