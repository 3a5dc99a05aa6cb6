from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nlmc.errors import ConfigError, DomainError, InvalidShapeError
from nlmc.geometry import (
    Ball,
    BallUnion,
    Ellipsoid,
    Location,
    StarShape,
    boundary_point,
    classical_mean_curvature,
    measures,
    membership,
    surface_quadrature,
)
from nlmc.quadrature import QuadratureSpec

from conftest import angle


def rot3(a, b):
    ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
    Rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    Rx = np.array([[1, 0, 0], [0, cb, -sb], [0, sb, cb]])
    return Rz @ Rx


def test_ball_boundary_point():
    x, nu, J = boundary_point(Ball([0, 0], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(x, [1, 0])
    np.testing.assert_allclose(nu, [1, 0])
    assert J == pytest.approx(1.0)


def test_ellipse_axis_point():
    x, nu, _ = boundary_point(Ellipsoid([0, 0], [1, 2]), [0.0, 1.0])
    np.testing.assert_allclose(x, [0, 2], atol=1e-15)
    np.testing.assert_allclose(nu, [0, 1], atol=1e-15)


def test_star_point_and_normal_against_fd():
    sh = StarShape([0, 0], [(2, 0.1, 0.0)])
    x, nu, J = boundary_point(sh, [1.0, 0.0])
    np.testing.assert_allclose(x, [1.1, 0], atol=1e-15)
    np.testing.assert_allclose(nu, [1, 0], atol=1e-15)
    # generic point: normal orthogonal to the FD tangent, Jacobian equals |dx/dt|
    t, h = 0.7, 1e-5
    x0, n0, J0 = boundary_point(sh, angle(t))
    dx = (boundary_point(sh, angle(t + h))[0] - boundary_point(sh, angle(t - h))[0]) / (2 * h)
    assert abs(dx @ n0) < 1e-9
    assert J0 == pytest.approx(np.linalg.norm(dx), rel=1e-9)


def test_star_rejects_nonpositive_radius():
    with pytest.raises(InvalidShapeError):
        StarShape([0, 0], [(2, 1.2, 0.0)])


def test_parameter_must_be_unit():
    with pytest.raises(DomainError):
        boundary_point(Ball([0, 0], 1.0), [2.0, 0.0])


def test_membership_examples():
    b = Ball([0, 0], 1.0)
    assert membership(b, [0, 0]) is Location.INSIDE
    assert membership(b, [1, 0], tol=1e-9) is Location.BOUNDARY
    assert membership(b, [1.5, 0]) is Location.OUTSIDE
    u = BallUnion([Ball([-2, 0], 1), Ball([2, 0], 1)])
    assert membership(u, [0, 0]) is Location.OUTSIDE
    with pytest.raises(ConfigError):
        membership(b, [0, 0], tol=-1)


def test_union_requires_gap():
    with pytest.raises(InvalidShapeError):
        BallUnion([Ball([-1, 0], 1), Ball([1, 0], 1)])


@pytest.mark.parametrize("shape", [
    Ellipsoid([0.2, -0.1], [1.0, 1.3]),
    StarShape([0, 0], [(3, 0.05, -0.02), (2, 0.0, 0.04)]),
    Ellipsoid([0, 0, 0], [1.0, 1.1, 0.9]),
    StarShape([0, 0, 0], [(2, 1, 0.08), (3, -2, 0.05)]),
])
def test_boundary_nodes_are_on_boundary(shape):
    S = surface_quadrature(shape, QuadratureSpec(32))
    assert np.all(shape.locate(S.position, 1e-9) == 0)
    np.testing.assert_allclose(np.linalg.norm(S.normal, axis=1), 1.0, atol=1e-12)
    assert np.all(S.weight > 0)


def test_surface_area_sphere_and_ellipse():
    assert np.sum(surface_quadrature(Ball([0, 0], 1), 64).weight) == pytest.approx(2 * pi, rel=1e-12)
    assert np.sum(surface_quadrature(Ball([0, 0, 0], 1), 32).weight) == pytest.approx(4 * pi, rel=1e-10)
    a, b = 1.0, 1.05
    ref = integrate.quad(lambda t: np.hypot(a * np.sin(t), b * np.cos(t)), 0, 2 * pi, epsabs=1e-13,
                         epsrel=1e-13, limit=200)[0]
    assert np.sum(surface_quadrature(Ellipsoid([0, 0], [a, b]), 128).weight) == pytest.approx(ref, rel=1e-10)


def test_n3_convergence_of_area():
    sh = Ellipsoid([0, 0, 0], [1.0, 1.2, 0.8])
    vals = [np.sum(surface_quadrature(sh, N).weight) for N in (16, 20, 24, 96)]
    errs = [abs(v - vals[-1]) for v in vals[:-1]]
    assert errs[1] <= errs[0] / 4 and errs[2] <= errs[1] / 4


def test_measures_examples():
    m = measures(Ball([0, 0], 1))
    assert m.volume == pytest.approx(pi, rel=1e-12) and m.diameter == 2.0
    np.testing.assert_allclose(m.barycenter, 0, atol=1e-13)
    m = measures(Ellipsoid([0, 0], [1, 1.1]))
    assert m.volume == pytest.approx(1.1 * pi, rel=1e-12) and m.diameter == pytest.approx(2.2)
    m = measures(BallUnion([Ball([-2, 0], 1), Ball([2, 0], 1)]))
    assert m.volume == pytest.approx(2 * pi, rel=1e-12) and m.diameter == pytest.approx(6.0)
    m = measures(Ellipsoid([0, 0, 0], [1, 1, 2]), QuadratureSpec(48))
    assert m.volume == pytest.approx(8 * pi / 3, rel=1e-10)


def test_star_diameter_refined():
    sh = StarShape([0, 0], [(2, 0.1, 0.0)])
    # 1 + 0.1 cos 2t: farthest pair is t = 0, pi -> 2.2
    assert measures(sh).diameter == pytest.approx(2.2, rel=1e-8)


def test_barycenter_translates():
    m = measures(Ellipsoid([0.3, -0.2], [1, 1.4]))
    np.testing.assert_allclose(m.barycenter, [0.3, -0.2], atol=1e-12)


def test_rigid_motion_invariance_n3():
    sh = StarShape([0, 0, 0], [(2, 0, 0.06), (3, 1, 0.04)])
    moved = sh.rotated(rot3(0.4, 1.1)).translated([0.5, -1.0, 2.0])
    a, b = measures(sh, QuadratureSpec(32)), measures(moved, QuadratureSpec(32))
    assert b.volume == pytest.approx(a.volume, rel=1e-12)
    assert b.surface_area == pytest.approx(a.surface_area, rel=1e-12)
    assert b.diameter == pytest.approx(a.diameter, rel=1e-8)


def test_classical_curvature():
    assert classical_mean_curvature(Ball([0, 0], 2.0), [1.0, 0.0]) == pytest.approx(0.5, rel=1e-7)
    assert classical_mean_curvature(Ball([0, 0, 0], 1.0), [0.0, 0.6, 0.8]) == pytest.approx(1.0, rel=1e-7)
    assert classical_mean_curvature(Ellipsoid([0, 0], [1, 2]), [1.0, 0.0]) == pytest.approx(0.25, rel=1e-7)
    assert classical_mean_curvature(StarShape([0, 0], [(2, 0.0, 0.0)]), angle(1.0)) == pytest.approx(1.0, rel=1e-7)
    # ellipsoid (1,1,2) at (1,0,0): principal curvatures 1 and 1/4
    assert classical_mean_curvature(Ellipsoid([0, 0, 0], [1, 1, 2]), [1.0, 0, 0]) == pytest.approx(0.625, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.5, 2.0), b=st.floats(0.5, 2.0), t=st.floats(0, 2 * pi), lam=st.floats(0.3, 3.0))
def test_scaling_moves_boundary(a, b, t, lam):
    sh = Ellipsoid([0.1, 0.2], [a, b])
    x, nu, J = sh.boundary_point(angle(t)[None])
    xs, nus, Js = sh.scaled(lam).boundary_point(angle(t)[None])
    np.testing.assert_allclose(xs, lam * x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(nus, nu, atol=1e-12)
    np.testing.assert_allclose(Js, lam * J, rtol=1e-12)
