from math import pi

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlmc.errors import ConfigError, DomainError
from nlmc.kernel import (
    ExactKernel,
    FracParams,
    GeneralKernel,
    MollifiedKernel,
    kernel_value,
    omega,
    phi_eps,
    psi_eps,
    smooth_cutoff,
)


def test_omega_values():
    assert omega(2) == 2.0
    assert omega(3) == pytest.approx(2 * pi, rel=1e-15)


@pytest.mark.parametrize("n,r,expected", [(2, 1.0, 0.5), (3, 1.0, 1 / (2 * pi))])
def test_kernel_value_unit_radius(n, r, expected):
    assert kernel_value(r, FracParams(n, 0.25)) == pytest.approx(expected, rel=1e-15)


def test_kernel_value_against_mpmath():
    mp.mp.dps = 30
    ref = float(mp.mpf("0.5") * mp.power(2, mp.mpf("-2.5")))
    assert kernel_value(2.0, FracParams(2, 0.25)) == pytest.approx(ref, rel=1e-15)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_kernel_homogeneity(lam):
    p = FracParams(3, 0.3)
    r = np.geomspace(0.01, 5, 17)
    np.testing.assert_allclose(kernel_value(lam * r, p), lam ** (-p.order) * kernel_value(r, p), rtol=1e-14)


def test_kernel_value_rejects_nonpositive():
    with pytest.raises(DomainError):
        kernel_value(0.0, FracParams(2, 0.25))


@pytest.mark.parametrize("bad", [dict(n=4, s=0.25), dict(n=2, s=0.5), dict(n=2, s=0.0), dict(n=2, s=0.495),
                                 dict(n=2, s=0.25, eps=-1.0)])
def test_params_validation(bad):
    with pytest.raises(ConfigError):
        FracParams(**bad)


def test_non_strict_allows_outer_range():
    assert FracParams(2, 0.495, strict=False).s == 0.495


def test_cutoff_shape():
    x = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 2.0])
    c = smooth_cutoff(x)
    assert c[0] == c[1] == c[2] == 1.0
    assert 0 < c[3] < 1
    assert c[4] == c[5] == 0.0


@pytest.mark.parametrize("n", [2, 3])
def test_phi_at_origin_is_finite(n):
    p = FracParams(n, 0.25, 0.1)
    assert phi_eps(0.0, p) == pytest.approx(0.1 ** (-p.order) / p.omega, rel=1e-14)


def test_phi_compact_support():
    p = FracParams(2, 0.25, 0.1)
    assert np.all(phi_eps(np.array([10.0, 12.0, 50.0]), p, cutoff_radius=10.0) == 0.0)


def test_phi_monotone_in_eps_and_limit():
    r = np.geomspace(0.05, 3.0, 25)
    base = FracParams(2, 0.25)
    prev = np.zeros_like(r)
    for k in range(7):
        v = MollifiedKernel(base.with_eps(0.1 / 2**k), np.inf).phi(r)
        assert np.all(v >= prev)
        prev = v
    np.testing.assert_array_less(prev, kernel_value(r, base) * (1 + 1e-15))
    assert np.max(np.abs(prev / kernel_value(r, base) - 1)) < 0.02


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.025])
def test_phi_signs_and_bound(eps):
    p = FracParams(3, 0.25, eps)
    t = np.geomspace(1e-3, 12, 400)
    for R in (10.0, np.inf):
        k = MollifiedKernel(p, R)
        ph, dph = k.phi(t), k.dphi(t)
        assert np.all(ph >= 0) and np.all(dph <= 0)
        # uniform in eps; the cutoff transition adds at most a fixed factor
        assert np.all(t**p.order * ph + t ** (p.order + 1) * np.abs(dph) <= 10.0 / p.omega)
    # the derivative envelope holds for the untruncated profile and inside R/2
    k = MollifiedKernel(p, np.inf)
    assert np.all(np.abs(k.dphi(t)) <= p.order / (p.omega * t ** (p.order + 1)) * (1 + 1e-12))
    k = MollifiedKernel(p, 10.0)
    ti = t[t <= 5.0]
    assert np.all(np.abs(k.dphi(ti)) <= p.order / (p.omega * ti ** (p.order + 1)) * (1 + 1e-12))


def test_dphi_grows_as_eps_shrinks():
    t = np.geomspace(0.01, 4, 50)
    d = [np.abs(MollifiedKernel(FracParams(2, 0.25, e), 10.0).dphi(t)) for e in (0.1, 0.05, 0.025)]
    assert np.all(d[1] >= d[0] - 1e-15) and np.all(d[2] >= d[1] - 1e-15)


@pytest.mark.parametrize("n", [2, 3])
def test_psi_closed_form_matches_quadrature(n):
    k = MollifiedKernel(FracParams(n, 0.25, 0.1), 10.0)
    t = np.array([0.01, 0.3, 1.0, 4.0, 7.0])
    np.testing.assert_allclose(k.psi(t), k.psi_direct(t), rtol=1e-8)


def test_psi_beyond_cutoff_is_zero():
    assert np.all(psi_eps(np.array([10.0, 11.0]), FracParams(2, 0.25, 0.1), cutoff_radius=10.0) == 0.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_divergence_identity(r):
    p = FracParams(3, 0.25, 0.1)
    k = MollifiedKernel(p, 10.0)
    h = 1e-4 * r
    dpsi = (k.psi(r + h) - k.psi(r - h)) / (2 * h)
    lhs = p.n * k.psi(r) + r * dpsi
    assert lhs == pytest.approx(k.phi(r), rel=1e-6)


def test_psi_sign_and_uniform_bound():
    t = np.geomspace(0.01, 10, 200)
    consts = []
    for e in (0.1, 0.05, 0.025):
        p = FracParams(2, 0.25, e)
        k = MollifiedKernel(p, 10.0)
        assert np.all(k.psi(t) <= 0)
        a = p.order
        consts.append(np.max(t**a * np.abs(k.psi(t)) + t ** (a + 1) * np.abs(k.dpsi(t))
                             + t ** (a + 2) * np.abs(k.d2psi(t))))
    assert max(consts) < 2 * min(consts)


def test_exact_psi_formula():
    p = FracParams(2, 0.25)
    k = ExactKernel(p)
    t = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(k.psi(t), -t ** (-p.order) / (2 * p.s * p.omega), rtol=1e-14)


def test_mollified_requires_eps():
    with pytest.raises(DomainError):
        MollifiedKernel(FracParams(2, 0.25), 10.0)


def test_general_kernel_reproduces_fractional_tail():
    p = FracParams(2, 0.25, 0.05)
    ref = MollifiedKernel(p, np.inf)
    gen = GeneralKernel(lambda t: ref.phi(np.array([t]))[0], 2, 200.0, t_min=1e-4)
    t = np.array([0.05, 0.2, 1.0, 3.0])
    # the general kernel is truncated at 200; compare the finite part of the tail
    np.testing.assert_allclose(gen.flux_tail(t), ref.flux_tail(t) - ref.flux_tail(200.0), rtol=1e-6)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 5.0), lam=st.floats(0.1, 10.0), s=st.floats(0.05, 0.45))
def test_kernel_scaling_property(r, lam, s):
    p = FracParams(2, s)
    assert kernel_value(lam * r, p) == pytest.approx(lam ** (-p.order) * kernel_value(r, p), rel=1e-12)
