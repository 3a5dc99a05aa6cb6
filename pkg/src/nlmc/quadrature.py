"""Quadrature on the parameter sphere S^{n-1}.

Two kinds of rules:

* global rules (periodic trapezoid on the circle; Gauss-Legendre in cos(colatitude)
  times uniform longitude on S^2) for smooth integrands;
* pole rules centred at a parameter point ``u_p``: geodesic distance ``r``
  from the pole is split at ``pole_cap_radius``.  Inside the cap the radial
  rule is either Gauss-Jacobi with weight ``r^{-2s}`` or geometrically graded
  Gauss-Legendre panels; outside it is Gauss-Legendre.  Azimuthal nodes (or
  the two sides of the pole on the circle) come in antipodal pairs, so terms
  odd about the pole cancel exactly.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import pi

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from nlmc import _backend
from nlmc.errors import ConfigError

MIN_RESOLUTION = 16
DEFAULT_CAP_NODES = 24


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution and pole treatment.

    ``resolution`` is the number of nodes per great circle of the global rule.
    The cap uses 24 radial nodes by default; more nodes crowd the pole, where
    the flux numerator loses digits to cancellation.  Outer nodes default to ``N``.
    """

    resolution: int = 64
    pole_rule: str = "gauss_jacobi"
    pole_cap_radius: float = pi / 8
    cap_nodes: int | None = None
    outer_nodes: int | None = None
    panel_nodes: int = 12

    def __post_init__(self):
        if self.resolution < MIN_RESOLUTION:
            raise ConfigError(f"resolution must be >= {MIN_RESOLUTION}, got {self.resolution}")
        if self.pole_rule not in ("gauss_jacobi", "graded"):
            raise ConfigError(f"unknown pole rule {self.pole_rule!r}")
        if not 0 < self.pole_cap_radius <= pi / 4:
            raise ConfigError("pole_cap_radius must lie in (0, pi/4]")

    @property
    def n_cap(self):
        return self.cap_nodes or DEFAULT_CAP_NODES

    @property
    def n_outer(self):
        return self.outer_nodes or self.resolution

    def refined(self, factor=2):
        return QuadratureSpec(
            self.resolution * factor,
            self.pole_rule,
            self.pole_cap_radius,
            self.cap_nodes * factor if self.cap_nodes else None,
            self.outer_nodes * factor if self.outer_nodes else None,
            self.panel_nodes,
        )


def gauss_legendre(m, a, b):
    x, w = roots_legendre(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi_singular(m, expo, r0):
    """Nodes/weights on (0, r0) exact for ``r^expo * poly(r)``.

    The weights already divide out ``r^expo``, so they apply to the full
    integrand: sum(w * F(r)) ~ int_0^r0 F(r) dr when F = r^expo * smooth.
    """
    x, w = roots_jacobi(m, 0.0, expo)
    r = 0.5 * r0 * (x + 1.0)
    return r, w * (0.5 * r0) ** (1.0 + expo) * r ** (-expo)


def graded_panels(m, r_min, r0, singular_expo=None):
    """Gauss-Legendre on panels [r0/2^{k+1}, r0/2^k] down to ``r_min``, then [0, r_last].

    With ``singular_expo`` the innermost panel uses the Gauss-Jacobi rule for
    ``r^singular_expo`` instead of Gauss-Legendre.
    """
    edges = [r0]
    while edges[-1] > r_min:
        edges.append(0.5 * edges[-1])
    edges.append(0.0)
    rs, ws = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        if lo == 0.0 and singular_expo is not None:
            r, w = gauss_jacobi_singular(m, singular_expo, hi)
        else:
            r, w = gauss_legendre(m, lo, hi)
        rs.append(r)
        ws.append(w)
    r = np.concatenate(rs[::-1])
    w = np.concatenate(ws[::-1])
    return r, w


@lru_cache(maxsize=64)
def global_rule(n, resolution):
    """Global product rule: (U (K, n) unit vectors, W (K,) weights)."""
    N = resolution
    if n == 2:
        t = 2 * pi * np.arange(N) / N
        U = np.stack([np.cos(t), np.sin(t)], axis=-1)
        W = np.full(N, 2 * pi / N)
    else:
        z, wz = roots_legendre(N)
        ph = pi * np.arange(2 * N) / N
        st = np.sqrt(1 - z * z)
        U = np.stack(
            [
                (st[:, None] * np.cos(ph)[None, :]).ravel(),
                (st[:, None] * np.sin(ph)[None, :]).ravel(),
                np.repeat(z, 2 * N),
            ],
            axis=-1,
        )
        W = np.repeat(wz, 2 * N) * (pi / N)
    U.setflags(write=False)
    W.setflags(write=False)
    return U, W


def _radial_rule(spec, s, r_min):
    r0 = spec.pole_cap_radius
    if spec.pole_rule == "gauss_jacobi" and r_min is None:
        rc, wc = gauss_jacobi_singular(spec.n_cap, -2.0 * s, r0)
    else:
        if r_min is not None:
            rc, wc = graded_panels(spec.panel_nodes, r_min, r0)
        else:
            # unresolved singular profile: a few panels, then a Jacobi panel at the pole
            rc, wc = graded_panels(spec.panel_nodes, r0 * 2.0**-6, r0, -2.0 * s)
    ro, wo = gauss_legendre(spec.n_outer if spec.n_outer else spec.resolution, r0, pi)
    return np.concatenate([rc, ro]), np.concatenate([wc, wo]), rc.size


@lru_cache(maxsize=256)
def local_pole_rule(n, s, spec, r_min=None):
    """Pole rule around the reference pole (e1 for n=2, e3 for n=3).

    ``r_min`` switches the cap to graded panels resolving scales down to
    ``r_min`` (used for mollified kernels).  Returns (L (K, n), W (K,), radii (K,)).
    """
    r, w, _ = _radial_rule(spec, s, r_min)
    if n == 2:
        # half of the outer budget per side
        if spec.outer_nodes is None:
            r, w, _ = _radial_rule(
                QuadratureSpec(
                    spec.resolution,
                    spec.pole_rule,
                    spec.pole_cap_radius,
                    spec.cap_nodes,
                    max(8, spec.resolution // 2),
                    spec.panel_nodes,
                ),
                s,
                r_min,
            )
        sig = np.concatenate([r, -r])
        L = np.stack([np.cos(sig), np.sin(sig)], axis=-1)
        W = np.concatenate([w, w])
        radii = np.concatenate([r, r])
    else:
        naz = 2 * spec.resolution
        ph = 2 * pi * (np.arange(naz) + 0.5) / naz
        sr, cr = np.sin(r), np.cos(r)
        L = np.stack(
            [
                (sr[:, None] * np.cos(ph)[None, :]).ravel(),
                (sr[:, None] * np.sin(ph)[None, :]).ravel(),
                np.repeat(cr, naz),
            ],
            axis=-1,
        )
        W = np.repeat(w * sr * (2 * pi / naz), naz)
        radii = np.repeat(r, naz)
    for a in (L, W, radii):
        a.setflags(write=False)
    return L, W, radii


def pole_rotation(u):
    """Rotation taking the reference pole to ``u`` (smooth except at the antipode for n=3)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] == 2:
        c, s = u[..., 0], u[..., 1]
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    u = np.atleast_2d(u)
    R = np.empty(u.shape[:-1] + (3, 3))
    flip = np.diag([1.0, -1.0, -1.0])
    for i, v in enumerate(u):
        # southern points: rotate the flipped point, then flip back (keeps 1+c away from 0)
        south = v[2] < 0
        w = flip @ v if south else v
        c = w[2]
        K = np.array([[0.0, 0.0, w[0]], [0.0, 0.0, w[1]], [-w[0], -w[1], 0.0]])
        Ri = np.eye(3) + K + K @ K / (1.0 + c)
        R[i] = flip @ Ri if south else Ri
    return R


def rotate_rule(L, R):
    """Unit nodes ``R[b] @ L[k]`` for a batch of rotations, shape (B, K, n)."""
    R = np.asarray(R, dtype=float)
    if R.ndim == 2:
        R = R[None]
    return _backend.rotate_nodes(R, L)


def tangent_basis(u):
    """Orthonormal tangent vectors at ``u`` on S^{n-1}, shape (n-1, n)."""
    u = np.asarray(u, dtype=float)
    if u.size == 2:
        return np.array([[-u[1], u[0]]])
    a = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = a - np.dot(a, u) * u
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(u, t1)
    return np.stack([t1, t2])


def fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    ph = pi * (1 + 5**0.5) * i
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(ph), r * np.sin(ph), z], axis=-1)


def direction_set(n, count):
    """Deterministic direction set: equispaced angles (n=2) or a Fibonacci sphere (n=3)."""
    if n == 2:
        t = 2 * pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    return fibonacci_sphere(count)
