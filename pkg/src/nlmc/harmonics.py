"""Harmonic polynomials used as radial profiles over the unit sphere.

A real Fourier mode (n=2) or real spherical harmonic (n=3) is stored as the
coefficient tensor of its homogeneous harmonic extension, so values and
tangential gradients on the sphere are plain polynomial evaluations.
"""
from functools import lru_cache
from math import comb, factorial, pi, sqrt

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P
from scipy.signal import convolve

from nlmc.errors import ConfigError


def _pad(c, shape):
    out = np.zeros(shape)
    out[tuple(slice(0, k) for k in c.shape)] = c
    return out


def _mul(a, b):
    return convolve(a, b)


def _complex_power(m, n):
    """Coefficient arrays of Re and Im of (x + i y)**m in n variables."""
    shape = (m + 1,) * n
    re = np.zeros(shape)
    im = np.zeros(shape)
    for k in range(m + 1):
        c = float(comb(m, k))
        idx = [0] * n
        idx[0], idx[1] = m - k, k
        # i**k cycles 1, i, -1, -i
        phase = k % 4
        if phase == 0:
            re[tuple(idx)] += c
        elif phase == 1:
            im[tuple(idx)] += c
        elif phase == 2:
            re[tuple(idx)] -= c
        else:
            im[tuple(idx)] -= c
    return re, im


@lru_cache(maxsize=None)
def _fourier_mode(k, kind):
    re, im = _complex_power(k, 2)
    return re if kind == "cos" else im


@lru_cache(maxsize=None)
def _sh_mode(l, m):
    """Orthonormal real spherical harmonic Y_lm as a degree-l harmonic polynomial."""
    am = abs(m)
    if am > l:
        raise ConfigError(f"spherical harmonic order |m|={am} exceeds degree l={l}")
    # r^(l-|m|) * d^|m| P_l / dt^|m| (z/r) expands in z and r^2
    leg = L.leg2poly(np.eye(l + 1)[l])
    dleg = P.polyder(leg, am) if am else leg
    size = l + 1
    r2 = np.zeros((3, 3, 3))
    r2[2, 0, 0] = r2[0, 2, 0] = r2[0, 0, 2] = 1.0
    radial = np.zeros((size,) * 3)
    deg = l - am
    for j in range(deg // 2 + 1):
        c = dleg[deg - 2 * j] if deg - 2 * j < len(dleg) else 0.0
        if c == 0.0:
            continue
        term = np.zeros((deg - 2 * j + 1,) * 3)
        term[0, 0, deg - 2 * j] = 1.0
        for _ in range(j):
            term = _mul(term, r2)
        radial += _pad(term[: size, : size, : size], (size,) * 3) * c
    re, im = _complex_power(am, 3)
    ang = re if m >= 0 else im
    poly = _mul(ang, radial)
    norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - am) / factorial(l + am))
    if m != 0:
        norm *= sqrt(2.0)
    return _pad(poly[: size, : size, : size], (size,) * 3) * norm


def fourier_poly(terms):
    """Sum of ``a cos k t + b sin k t`` over ``terms = [(k, a, b), ...]`` as a 2-D polynomial."""
    kmax = max([int(k) for k, _, _ in terms] + [0])
    out = np.zeros((kmax + 1, kmax + 1))
    for k, a, b in terms:
        k = int(k)
        if k < 0:
            raise ConfigError("Fourier index must be >= 0")
        out += a * _pad(_fourier_mode(k, "cos"), out.shape)
        if k > 0:
            out += b * _pad(_fourier_mode(k, "sin"), out.shape)
    return out


def sh_poly(terms):
    """Sum of ``c * Y_lm`` over ``terms = [(l, m, c), ...]`` as a 3-D polynomial."""
    lmax = max([int(l) for l, _, _ in terms] + [0])
    out = np.zeros((lmax + 1,) * 3)
    for l, m, c in terms:
        out += c * _pad(_sh_mode(int(l), int(m)), out.shape)
    return out


def evaluate(coef, u):
    """Polynomial value at points ``u`` of shape (K, n)."""
    if coef.ndim == 2:
        return P.polyval2d(u[:, 0], u[:, 1], coef)
    return P.polyval3d(u[:, 0], u[:, 1], u[:, 2], coef)


def gradient(coef, u):
    """Ambient gradient of the polynomial at ``u``, shape (K, n)."""
    n = coef.ndim
    cols = []
    for ax in range(n):
        d = P.polyder(coef, axis=ax)
        if d.size == 0 or d.shape[ax] == 0:
            cols.append(np.zeros(u.shape[0]))
        else:
            cols.append(evaluate(d, u))
    return np.stack(cols, axis=-1)


def tangential_gradient(coef, u):
    g = gradient(coef, u)
    return g - np.sum(g * u, axis=-1, keepdims=True) * u
