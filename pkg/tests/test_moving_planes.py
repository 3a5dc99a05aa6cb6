from math import sqrt

import numpy as np
import pytest

from nlmc.errors import ConfigError
from nlmc.geometry import Ball, BallUnion, Ellipsoid, StarShape
from nlmc.moving_planes import (
    PlaneConfig,
    _Planes,
    check_prop_1direction,
    critical_lambda,
    critical_plane_concentration,
    reflect,
    symdiff_grid,
    symdiff_volume,
)
from nlmc.stability import lipschitz_deficit

from conftest import angle


def test_reflect_examples():
    pl = PlaneConfig(np.array([1.0, 0.0]), 0.5)
    np.testing.assert_allclose(reflect([2.0, 3.0], pl), [-1.0, 3.0])
    pl3 = PlaneConfig(np.array([0.0, 0.0, 1.0]), 0.0)
    np.testing.assert_allclose(reflect([1.0, 2.0, 3.0], pl3), [1.0, 2.0, -3.0])


def test_reflect_involution():
    rng = np.random.default_rng(0)
    e = rng.normal(size=3)
    pl = PlaneConfig(e / np.linalg.norm(e), 0.3)
    X = rng.normal(size=(50, 3))
    np.testing.assert_allclose(reflect(reflect(X, pl), pl), X, atol=1e-14)
    np.testing.assert_allclose(X @ pl.e - 0.3, -(reflect(X, pl) @ pl.e - 0.3), atol=1e-14)


def test_plane_requires_unit():
    with pytest.raises(ConfigError):
        PlaneConfig(np.array([1.0, 1.0]), 0.0)


@pytest.mark.parametrize("theta", [0.0, 0.7, 2.0])
def test_ball_lambda_is_center(theta):
    c = np.array([0.3, -0.2])
    out = critical_lambda(Ball(c, 1.0), angle(theta))
    assert out.lam == pytest.approx(float(c @ angle(theta)), abs=1e-6)
    assert out.case_tag in ("orthogonality", "both")
    assert out.monotone_ok


def test_ball_lambda_n3():
    c = np.array([0.1, 0.2, -0.3])
    e = np.array([0.0, 0.6, 0.8])
    out = critical_lambda(Ball(c, 1.0), e)
    assert out.lam == pytest.approx(float(c @ e), abs=1e-5)


def test_translation_equivariance():
    sh = StarShape([0, 0], [(2, 0.05, 0.0), (3, 0.03, 0.01)])
    e = angle(0.4)
    v = np.array([0.5, -1.5])
    a = critical_lambda(sh, e).lam
    b = critical_lambda(sh.translated(v), e).lam
    assert b == pytest.approx(a + float(v @ e), abs=1e-6)


def test_ellipse_axis_directions_are_symmetric():
    sh = Ellipsoid([0, 0], [1, 1.1])
    for e in (angle(0.0), angle(np.pi / 2)):
        out = critical_lambda(sh, e)
        assert abs(out.lam) <= 1e-6
        assert out.case_tag in ("orthogonality", "both")


def test_ellipse_diagonal_oracle():
    sh = Ellipsoid([0, 0], [1, 1.1])
    e = angle(np.pi / 4)
    out = critical_lambda(sh, e)
    fine = critical_lambda(sh, e, steps=4000)
    assert out.lam == pytest.approx(fine.lam, abs=1e-6)
    assert out.lam == pytest.approx(0.0998709, abs=2e-5)


def test_lambda_converges_in_nodes():
    from nlmc.quadrature import QuadratureSpec

    sh = Ellipsoid([0, 0], [1, 1.02])
    e = angle(np.pi / 4)
    a = critical_lambda(sh, e, spec=QuadratureSpec(1024)).lam
    b = critical_lambda(sh, e, spec=QuadratureSpec(4096)).lam
    assert a == pytest.approx(b, abs=1e-4)


def test_union_lambda():
    sh = BallUnion([Ball([-2, 0], 1), Ball([2, 0], 1)])
    out = critical_lambda(sh, np.array([1.0, 0.0]))
    assert out.lam == pytest.approx(2.0, abs=1e-6)
    assert out.monotone_ok
    out = critical_lambda(sh, np.array([0.0, 1.0]))
    assert out.lam == pytest.approx(0.0, abs=1e-6)


def test_critical_lambda_rejects_bad_tol():
    with pytest.raises(ConfigError):
        critical_lambda(Ball([0, 0], 1), [1.0, 0.0], tol=-1.0)


def test_symdiff_ball_zero():
    r = symdiff_volume(Ball([0, 0], 1), [1.0, 0.0], 0.0, samples=20000)
    assert r.volume == 0.0 and r.weighted == 0.0


def test_symdiff_shifted_ball_closed_form():
    # reflecting a unit disk across x = 0.1 shifts it by 0.2; lens area from the chord formula
    d = 0.2
    lens = 2 * np.arccos(d / 2) - d / 2 * sqrt(4 - d * d)
    exact = 2 * (np.pi - lens)
    r = symdiff_volume(Ball([0, 0], 1), [1.0, 0.0], 0.1, samples=400_000, seed=1)
    assert abs(r.volume - exact) <= 4 * r.volume_se


def test_symdiff_grid_agrees():
    sh = Ellipsoid([0, 0], [1, 1.1])
    e = angle(np.pi / 4)
    lam = 0.05
    mc = symdiff_volume(sh, e, lam, samples=400_000, seed=3)
    vol, w = symdiff_grid(sh, e, lam, cells=1024)
    assert abs(mc.volume - vol) <= 3 * mc.volume_se + 1e-4
    assert abs(mc.weighted - w) <= 3 * mc.weighted_se + 1e-5


def test_symdiff_deterministic_in_seed():
    sh = Ellipsoid([0, 0], [1, 1.1])
    a = symdiff_volume(sh, [1.0, 0.0], 0.05, samples=50_000, seed=9)
    b = symdiff_volume(sh, [1.0, 0.0], 0.05, samples=50_000, seed=9)
    assert a.volume == b.volume


def test_prop_check_margins(p2):
    from nlmc.curvature import hs_field
    from nlmc.quadrature import QuadratureSpec

    sh = Ellipsoid([0, 0], [1, 1.1])
    spec = QuadratureSpec(256)
    d = lipschitz_deficit(hs_field(sh, p2, spec, selfcheck=False), shape=sh, params=p2, spec=spec).delta_s
    chk = check_prop_1direction(sh, angle(np.pi / 4), p2, d, samples=200_000, radii=(1.0, 1.1))
    assert chk.ok and chk.margin_a > 0 and chk.margin_weighted > 0
    assert chk.bound_a > chk.symdiff
    assert np.isfinite(chk.ratio_b) and chk.ratio_b > 0


def test_concentration_centered_ball(p2):
    rep = critical_plane_concentration(Ball([0.3, 0.0], 1.0), p2, 0.0, direction_count=8)
    np.testing.assert_allclose(rep.shift, [0.3, 0.0], atol=1e-6)
    assert rep.max_abs_lambda <= 1e-6
    assert rep.hypothesis_ok and rep.flag == ""


def test_concentration_flags_hypothesis(p2):
    rep = critical_plane_concentration(Ellipsoid([0, 0], [1, 1.1]), p2, 0.5, direction_count=8)
    assert not rep.hypothesis_ok
    assert rep.flag == "hypothesis not satisfied"
    assert rep.ratio <= 1


def test_node_spacing_is_arc_length():
    pl = _Planes(Ball([0, 0], 1.0))
    assert pl.h == pytest.approx(2 * np.pi / len(pl.X), rel=1e-12)


def test_concentration_small_perturbation_meets_hypothesis(p2):
    from nlmc.quadrature import QuadratureSpec
    from nlmc.stability import stability_report

    sh = Ellipsoid([0, 0], [1, 1.0002])
    d = stability_report(sh, p2, QuadratureSpec(256)).delta_s
    rep = critical_plane_concentration(sh, p2, d, direction_count=16)
    assert rep.hypothesis_ok
    assert rep.max_abs_lambda <= rep.bound
