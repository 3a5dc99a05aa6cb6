"""Analytic shapes: balls, disjoint ball unions, ellipsoids and star shapes.

Every shape is a finite union of *patches*.  A patch is a radial graph

    x(u) = center + R (rho(u) u),    u in S^{n-1}

with ``rho`` given in the body frame and ``R`` a rotation.  Boundary
positions, outward normals and area elements are exact:

    nu = R (rho u - grad_T rho) / sqrt(rho^2 + |grad_T rho|^2)
    J  = rho^{n-2} sqrt(rho^2 + |grad_T rho|^2)
"""
from dataclasses import dataclass, field
from enum import IntEnum
from math import pi

import numpy as np
from scipy import optimize

from nlmc import harmonics
from nlmc.errors import ConfigError, DomainError, InvalidShapeError
from nlmc.quadrature import QuadratureSpec, global_rule


class Location(IntEnum):
    INSIDE = 1
    BOUNDARY = 0
    OUTSIDE = -1


# ---------------------------------------------------------------- profiles


class ConstantProfile:
    def __init__(self, radius):
        self.radius = float(radius)

    def __call__(self, u):
        return np.full(u.shape[0], self.radius), np.zeros_like(u)

    def scaled(self, lam):
        return ConstantProfile(self.radius * lam)

    def bounds(self, n):
        return self.radius, self.radius


class EllipsoidProfile:
    def __init__(self, axes):
        self.axes = np.asarray(axes, dtype=float)
        self._ia2 = 1.0 / self.axes**2

    def __call__(self, u):
        q = u * u @ self._ia2
        rho = q**-0.5
        grad = -(q**-1.5)[:, None] * (u * self._ia2 - q[:, None] * u)
        return rho, grad

    def scaled(self, lam):
        return EllipsoidProfile(self.axes * lam)

    def bounds(self, n):
        return float(self.axes.min()), float(self.axes.max())


class HarmonicProfile:
    """``rho(u) = scale * (radius + sum of harmonic modes)``."""

    def __init__(self, n, terms, radius=1.0, scale=1.0):
        self.n = n
        self.terms = tuple(tuple(t) for t in terms)
        self.radius = float(radius)
        self.scale = float(scale)
        self.coef = harmonics.fourier_poly(self.terms) if n == 2 else harmonics.sh_poly(self.terms)

    def __call__(self, u):
        rho = self.scale * (self.radius + harmonics.evaluate(self.coef, u))
        grad = self.scale * harmonics.tangential_gradient(self.coef, u)
        return rho, grad

    def scaled(self, lam):
        return HarmonicProfile(self.n, self.terms, self.radius, self.scale * lam)

    def bounds(self, n):
        U, _ = global_rule(n, 128 if n == 2 else 48)
        rho, _ = self(U)
        return float(rho.min()), float(rho.max())


# ----------------------------------------------------------------- patches


@dataclass(frozen=True)
class Patch:
    center: np.ndarray
    rotation: np.ndarray
    profile: object

    @property
    def n(self):
        return self.center.size

    def boundary(self, u):
        """Positions, outward unit normals and area elements at body-frame parameters ``u`` (K, n)."""
        u = np.asarray(u, dtype=float)
        rho, g = self.profile(u)
        if np.any(rho <= 0):
            raise InvalidShapeError("radial function must stay positive")
        root = np.sqrt(rho * rho + np.sum(g * g, axis=-1))
        y = rho[:, None] * u
        nb = (y - g) / root[:, None]
        J = root if self.n == 2 else root * rho
        if self._identity:
            return self.center + y, nb, J
        Rt = self.rotation
        return self.center + y @ Rt.T, nb @ Rt.T, J

    @property
    def _identity(self):
        return bool(np.all(self.rotation == np.eye(self.n)))

    def to_body(self, x):
        return (np.asarray(x, dtype=float) - self.center) @ self.rotation

    def normal_gap(self, x):
        """Approximate signed distance to the patch boundary (negative inside)."""
        y = self.to_body(np.atleast_2d(x))
        d = np.linalg.norm(y, axis=-1)
        out = np.empty(d.shape)
        at_c = d == 0
        if np.any(at_c):
            out[at_c] = -self.profile(np.eye(self.n)[:1])[0][0]
        if np.any(~at_c):
            u = y[~at_c] / d[~at_c, None]
            rho, g = self.profile(u)
            # radial gap times cos(angle between ray and normal)
            cosang = rho / np.sqrt(rho * rho + np.sum(g * g, axis=-1))
            out[~at_c] = (d[~at_c] - rho) * cosang
        return out

    def transformed(self, shift=None, rot=None, lam=1.0):
        c = self.center * lam
        R = self.rotation
        if rot is not None:
            c = rot @ c
            R = rot @ R
        if shift is not None:
            c = c + shift
        return Patch(c, R, self.profile.scaled(lam) if lam != 1.0 else self.profile)


# ------------------------------------------------------------------ shapes


@dataclass(frozen=True)
class BoundarySample:
    position: np.ndarray
    normal: np.ndarray
    weight: float
    param: np.ndarray
    component_id: int


@dataclass(frozen=True)
class BoundarySamples:
    """Struct-of-arrays view of a boundary quadrature."""

    position: np.ndarray
    normal: np.ndarray
    weight: np.ndarray
    param: np.ndarray
    component: np.ndarray
    spacing: float = field(default=0.0)

    def __len__(self):
        return self.weight.size

    def __getitem__(self, i):
        return BoundarySample(self.position[i], self.normal[i], float(self.weight[i]), self.param[i],
                              int(self.component[i]))


def _as_rotation(rot, n):
    if rot is None:
        return np.eye(n)
    R = np.asarray(rot, dtype=float)
    if R.shape == () and n == 2:
        c, s = np.cos(float(R)), np.sin(float(R))
        return np.array([[c, -s], [s, c]])
    if R.shape != (n, n) or not np.allclose(R @ R.T, np.eye(n), atol=1e-12):
        raise ConfigError("rotation must be an orthogonal matrix (or an angle for n=2)")
    return R


class Shape:
    """Immutable union of star-shaped patches."""

    kind = "shape"

    def __init__(self, patches):
        self.patches = tuple(patches)
        self.n = self.patches[0].n

    # -- parametrization
    def boundary_point(self, u, component=0):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x, nu, J = self.patches[component].boundary(u)
        return x, nu, J

    # -- membership
    def signed_gap(self, x):
        return np.min(np.stack([p.normal_gap(x) for p in self.patches]), axis=0)

    def locate(self, x, tol=1e-9):
        """Vectorized membership: array of Location codes."""
        g = self.signed_gap(x)
        out = np.where(g < -tol, 1, np.where(g > tol, -1, 0))
        return out

    # -- quadrature
    def surface_quadrature(self, spec):
        if not isinstance(spec, QuadratureSpec):
            spec = QuadratureSpec(int(spec))
        U, W = global_rule(self.n, spec.resolution)
        parts = []
        for k, p in enumerate(self.patches):
            x, nu, J = p.boundary(U)
            parts.append((x, nu, W * J, U, np.full(U.shape[0], k)))
        cat = [np.concatenate(a) for a in zip(*parts)]
        return BoundarySamples(*cat, spacing=self.mesh_spacing(spec))

    def mesh_spacing(self, spec):
        """Largest distance between neighbouring nodes of the global rule."""
        N = spec.resolution if isinstance(spec, QuadratureSpec) else int(spec)
        rmax = max(p.profile.bounds(self.n)[1] for p in self.patches)
        return 2 * pi * rmax / N * 1.5

    def circumradius(self):
        c = self.patches[0].center
        return max(np.linalg.norm(p.center - c) + p.profile.bounds(self.n)[1] for p in self.patches)

    # -- transforms
    def _rebuild(self, patches):
        obj = object.__new__(type(self))
        obj.__dict__.update(self.__dict__)
        obj.patches = tuple(patches)
        return obj

    def translated(self, v):
        v = np.asarray(v, dtype=float)
        return self._rebuild(p.transformed(shift=v) for p in self.patches)

    def rotated(self, rot):
        R = _as_rotation(rot, self.n)
        return self._rebuild(p.transformed(rot=R) for p in self.patches)

    def scaled(self, lam):
        if lam <= 0:
            raise ConfigError("dilation factor must be positive")
        return self._rebuild(p.transformed(lam=float(lam)) for p in self.patches)

    # -- measures
    def exact_diameter(self):
        return None

    def measures(self, spec=QuadratureSpec(128)):
        return measures(self, spec)


class Ball(Shape):
    kind = "ball"

    def __init__(self, center, radius):
        c = np.asarray(center, dtype=float)
        if radius <= 0:
            raise InvalidShapeError("radius must be positive")
        super().__init__([Patch(c, np.eye(c.size), ConstantProfile(radius))])

    @property
    def center(self):
        return self.patches[0].center

    @property
    def radius(self):
        return self.patches[0].profile.radius

    def exact_diameter(self):
        return 2 * self.radius


class Ellipsoid(Shape):
    kind = "ellipsoid"

    def __init__(self, center, semi_axes, rotation=None):
        c = np.asarray(center, dtype=float)
        a = np.asarray(semi_axes, dtype=float)
        if a.shape != c.shape or np.any(a <= 0):
            raise InvalidShapeError("semi-axes must be positive, one per dimension")
        super().__init__([Patch(c, _as_rotation(rotation, c.size), EllipsoidProfile(a))])

    @property
    def semi_axes(self):
        return self.patches[0].profile.axes

    def exact_diameter(self):
        return 2 * float(self.semi_axes.max())


class StarShape(Shape):
    """Radial function ``radius + sum of modes``.

    For n=2 ``terms`` are ``(k, a_k, b_k)`` for ``a_k cos k t + b_k sin k t``;
    for n=3 they are ``(l, m, c_lm)`` on orthonormal real spherical harmonics.
    """

    kind = "star"

    def __init__(self, center, terms, radius=1.0, rotation=None, rho_min=1e-3):
        c = np.asarray(center, dtype=float)
        prof = HarmonicProfile(c.size, terms, radius)
        lo, _ = prof.bounds(c.size)
        if lo < rho_min:
            raise InvalidShapeError(f"radial function drops to {lo:.3g} < rho_min={rho_min}")
        super().__init__([Patch(c, _as_rotation(rotation, c.size), prof)])


class BallUnion(Shape):
    kind = "ball_union"

    def __init__(self, balls, gap_tol=1e-9):
        balls = list(balls)
        if len(balls) < 1:
            raise InvalidShapeError("ball union needs at least one ball")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                d = np.linalg.norm(balls[i].center - balls[j].center)
                if d <= balls[i].radius + balls[j].radius + gap_tol:
                    raise InvalidShapeError(f"balls {i} and {j} overlap or touch")
        super().__init__([b.patches[0] for b in balls])

    def exact_diameter(self):
        best = 0.0
        for p in self.patches:
            for q in self.patches:
                best = max(best, np.linalg.norm(p.center - q.center) + p.profile.radius + q.profile.radius)
        return best


# --------------------------------------------------------------- functions


def boundary_point(shape, u, component=0):
    """Position, outward normal and area element at a single parameter ``u``."""
    u = np.asarray(u, dtype=float)
    nrm = np.linalg.norm(u)
    if abs(nrm - 1.0) > 1e-10:
        raise DomainError("parameter must be a unit vector")
    x, nu, J = shape.boundary_point(u[None] / nrm, component)
    return x[0], nu[0], float(J[0])


def membership(shape, x, tol=1e-9):
    if tol < 0:
        raise ConfigError("tol must be >= 0")
    return Location(int(shape.locate(np.atleast_2d(x), tol)[0]))


def surface_quadrature(shape, spec):
    return shape.surface_quadrature(spec)


@dataclass(frozen=True)
class Measures:
    volume: float
    diameter: float
    barycenter: np.ndarray
    surface_area: float


def _refine_diameter(shape, S, d0):
    """Polish the best sample pair by local maximization over the two parameters."""
    P = S.position
    # candidate pairs: a few of the farthest from the sample set
    D2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    flat = np.argsort(D2, axis=None)[::-1][:8]
    n = shape.n
    best = d0

    def param(a):
        if n == 2:
            return np.array([np.cos(a[0]), np.sin(a[0])])
        st = np.sin(a[0])
        return np.array([st * np.cos(a[1]), st * np.sin(a[1]), np.cos(a[0])])

    def angles(u):
        if n == 2:
            return [np.arctan2(u[1], u[0])]
        return [np.arccos(np.clip(u[2], -1, 1)), np.arctan2(u[1], u[0])]

    for f in flat:
        i, j = np.unravel_index(f, D2.shape)
        ci, cj = S.component[i], S.component[j]
        x0 = np.array(angles(S.param[i]) + angles(S.param[j]))
        k = len(x0) // 2

        def negd(a):
            xi = shape.patches[ci].boundary(param(a[:k])[None])[0][0]
            xj = shape.patches[cj].boundary(param(a[k:])[None])[0][0]
            return -np.linalg.norm(xi - xj)

        res = optimize.minimize(negd, x0, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14 * d0, "maxiter": 4000})
        best = max(best, -res.fun)
    return best


def measures(shape, spec=QuadratureSpec(128)):
    """Volume, diameter, barycenter and surface area from a boundary quadrature."""
    S = shape.surface_quadrature(spec)
    n = shape.n
    xn = np.sum(S.position * S.normal, axis=-1)
    vol = float(np.sum(S.weight * xn) / n)
    r2 = np.sum(S.position**2, axis=-1)
    bary = np.sum((S.weight * 0.5 * r2)[:, None] * S.normal, axis=0) / vol
    diam = shape.exact_diameter()
    if diam is None:
        # coarse pairwise scan, then local polish of the best pairs
        C = shape.surface_quadrature(QuadratureSpec(128 if n == 2 else 24))
        d0 = float(np.sqrt(np.max(np.sum((C.position[:, None] - C.position[None]) ** 2, axis=-1))))
        diam = _refine_diameter(shape, C, d0)
    return Measures(vol, float(diam), bary, float(np.sum(S.weight)))


def _normal_field(patch, x):
    """Unit gradient of the implicit function |y| - rho(y/|y|) at ambient points ``x``."""
    y = patch.to_body(x)
    d = np.linalg.norm(y, axis=-1)
    u = y / d[:, None]
    _, g = patch.profile(u)
    grad = u - g / d[:, None]
    grad /= np.linalg.norm(grad, axis=-1, keepdims=True)
    return grad @ patch.rotation.T


def classical_mean_curvature(shape, u, component=0):
    """Mean of the principal curvatures (unit sphere has H = 1), via the divergence of the normal field."""
    patch = shape.patches[component]
    u = np.atleast_2d(np.asarray(u, dtype=float))
    x, _, _ = patch.boundary(u)
    n = shape.n
    scale = patch.profile.bounds(n)[1]
    h = 1e-4 * scale
    div = np.zeros(x.shape[0])
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        # fourth-order central difference
        f = lambda t: _normal_field(patch, x + t * e)[:, k]  # noqa: E731
        div += (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)
    out = div / (n - 1)
    return out[0] if out.size == 1 else out
