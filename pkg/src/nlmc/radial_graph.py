"""Near-sphere expansion of the fractional curvature.

For a boundary ``{y + f(y) y : y in S^{n-1}}`` the curvature at
``F(q) = q + f(q) q`` is split into seven sphere integrals.  The first five
are linear in ``f(y) - f(q)`` and define the kernel ``K(y, q)``; the last two
form the remainder ``g(q)``, so that

    H_s(F(q)) - H_s(B_1) = -int (f(y) - f(q)) K(y, q) dy + g(q).

Terms one to five are principal-value integrals whose leading singularity is
odd about ``q``; the symmetric pole rule cancels it exactly.
"""
from dataclasses import dataclass
import numpy as np

from nlmc import harmonics
from nlmc.curvature import hs_boundary
from nlmc.errors import DomainError
from nlmc.geometry import Ball, StarShape
from nlmc.quadrature import QuadratureSpec, local_pole_rule, pole_rotation, rotate_rule

AMPLITUDE_CAP = 0.25
MIN_RADIUS = 0.5


class RadialPerturbation:
    """``f(y) = constant + sum of harmonic modes`` on the unit sphere.

    ``terms`` follow :class:`nlmc.geometry.StarShape`: ``(k, a, b)`` Fourier
    triples for n=2, ``(l, m, c)`` spherical-harmonic triples for n=3.
    """

    def __init__(self, n, terms=(), constant=0.0, check=True):
        self.n = int(n)
        self.terms = tuple(tuple(t) for t in terms)
        self.constant = float(constant)
        self.coef = harmonics.fourier_poly(self.terms) if self.n == 2 else harmonics.sh_poly(self.terms)
        if check:
            self._validate()

    def _validate(self):
        from nlmc.quadrature import global_rule

        U, _ = global_rule(self.n, 128 if self.n == 2 else 48)
        v = self(U)
        if np.max(np.abs(v)) > AMPLITUDE_CAP:
            raise DomainError(f"perturbation amplitude {np.max(np.abs(v)):.3g} exceeds {AMPLITUDE_CAP}")
        if np.min(1 + v) < MIN_RADIUS:
            raise DomainError("1 + f must stay above 0.5")

    def __call__(self, y):
        y = np.atleast_2d(y)
        return self.constant + harmonics.evaluate(self.coef, y)

    def grad(self, y):
        return harmonics.tangential_gradient(self.coef, np.atleast_2d(y))

    def sup_norm(self):
        from nlmc.quadrature import global_rule

        U, _ = global_rule(self.n, 256 if self.n == 2 else 64)
        return float(np.max(np.abs(self(U))))

    def scaled(self, a):
        return RadialPerturbation(self.n, [(t[0], t[1], t[2] * a) if self.n == 3 else (t[0], t[1] * a, t[2] * a)
                                           for t in self.terms], self.constant * a)

    def rotated(self, R):
        """Perturbation ``f(R^T y)``, i.e. the graph rotated by ``R``."""
        return _RotatedPerturbation(self, np.asarray(R, dtype=float))

    def to_shape(self):
        """The star shape whose boundary is the graph of ``f``."""
        return StarShape(np.zeros(self.n), self.terms, radius=1.0 + self.constant)


class _RotatedPerturbation(RadialPerturbation):
    def __init__(self, base, R):
        self.base = base
        self.R = R
        self.n = base.n
        self.constant = base.constant
        self.terms = base.terms

    def __call__(self, y):
        return self.base(np.atleast_2d(y) @ self.R)

    def grad(self, y):
        return self.base.grad(np.atleast_2d(y) @ self.R) @ self.R.T

    def to_shape(self):
        return self.base.to_shape().rotated(self.R)


def gamma_f(f, y, q):
    """``(1 + f(y))^{n-1} - (1 + f(q))^{n-1}``."""
    n = f.n
    return (1 + f(y)) ** (n - 1) - (1 + f(np.atleast_2d(q))) ** (n - 1)


def v_q(f, y, q):
    """``y + f(y) y - q - f(q) q``."""
    y = np.atleast_2d(y)
    q = np.atleast_2d(q)
    return (1 + f(y))[:, None] * y - (1 + f(q))[:, None] * q


def p_poly(n, t, u):
    """Polynomial with ``Gamma_f = (n-1)(f(y) - f(q))(1 + P(f(y), f(q)))``."""
    if n == 2:
        return np.zeros_like(np.asarray(t, dtype=float))
    return 0.5 * (np.asarray(t) + np.asarray(u))


@dataclass
class ExpansionTerms:
    q: np.ndarray
    terms: np.ndarray
    total: float
    seventh_coefficient: float

    def __post_init__(self):
        # the total is the plain sum of the stored terms, in order
        acc = 0.0
        for t in self.terms:
            acc += t
        self.total = acc


def _pieces(f, y, q, params):
    """Common integrand factors at sphere nodes ``y`` (K, n) for one ``q``."""
    n, s = f.n, params.s
    q2 = np.atleast_2d(q)
    fy = f(y)
    fq = float(f(q2)[0])
    gy = f.grad(y)
    v = v_q(f, y, q2)
    av = np.sqrt(np.sum(v * v, axis=-1))
    d2 = np.sum((y - q2) ** 2, axis=-1)
    qgy = np.sum((q2 - y) * gy, axis=-1)
    return n, s, fy, fq, qgy, av, d2


def _seven(f, y, q, params, paper_coefficient=False):
    """The seven integrands (before quadrature weights), shape (7, K)."""
    n, s, fy, fq, qgy, av, d2 = _pieces(f, y, q, params)
    om = params.omega
    a = n + 2 * s
    G = (1 + fy) ** (n - 1) - (1 + fq) ** (n - 1)
    va = av ** (-a)
    vb = av ** (-a - 2)
    c7 = 1.0 / (4 * s * om) if paper_coefficient else a / (4 * s * (n - 1) * om)
    return np.stack([
        (1 + fy) * va * G / (s * om),
        -a / (s * (n - 1) * om) * (1 + fy) * (1 + fq) ** 2 * d2 * vb * G,
        a / (s * (n - 1) * om) * (1 + fq) * qgy * (fy - fq) * vb * G,
        a / (2 * s * (n - 1) * om) * (1 + fq) ** 2 * qgy * d2 * vb * G,
        (1 + fq) ** (n - 1) * (fy - fq) * va / (s * om),
        (1 + fq) ** n * d2 * va / (2 * s * om),
        c7 * (1 + fy) * (1 + fq) ** 2 * d2 * d2 * vb * G,
    ]), c7


def _sphere_nodes(n, s, q, spec):
    L, W, _ = local_pole_rule(n, s, spec)
    Y = rotate_rule(L, pole_rotation(np.atleast_2d(q)))[0]
    return Y, W


def _unit(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def expansion_terms(f, q, params, spec=QuadratureSpec(), paper_coefficient=False):
    """All seven term values at ``q``.

    ``paper_coefficient=True`` swaps in ``1/(4 s omega)`` for the last term;
    the default ``(n+2s)/(4 s (n-1) omega)`` is what the substitution
    ``1 + y.q = 2 - |y-q|^2/2`` produces.
    """
    q = _unit(q)
    Y, W = _sphere_nodes(f.n, params.s, q, spec)
    T, c7 = _seven(f, Y, q, params, paper_coefficient)
    vals = np.array([float(np.sum(W * t)) for t in T])
    return ExpansionTerms(q, vals, 0.0, c7)


def hs_radial_expansion(f, q, params, spec=QuadratureSpec(), paper_coefficient=False):
    return expansion_terms(f, q, params, spec, paper_coefficient).total


def kernel_K(f, y, q, params):
    """Kernel of the linear part, assembled from the five grouped terms."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    q = _unit(q)
    d2 = np.sum((y - q) ** 2, axis=-1)
    if np.any(d2 == 0):
        raise DomainError("kernel_K is singular at y = q")
    n, s, fy, fq, qgy, av, d2 = _pieces(f, y, q, params)
    om = params.omega
    a = n + 2 * s
    gp = (n - 1) * (1 + p_poly(n, fy, fq))
    va = av ** (-a)
    vb = av ** (-a - 2)
    bracket = (
        (1 + fy) * va * gp / (s * om)
        - a / (s * (n - 1) * om) * (1 + fy) * (1 + fq) ** 2 * d2 * vb * gp
        + a / (s * (n - 1) * om) * (1 + fq) * qgy * (fy - fq) * vb * gp
        + a / (2 * s * (n - 1) * om) * (1 + fq) ** 2 * qgy * d2 * vb * gp
        + (1 + fq) ** (n - 1) * va / (s * om)
    )
    return -bracket


def G_f(f, y, q, params):
    """``omega |y-q|^{n+2s} K / 2 - 1``; vanishes for f = 0."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    q = _unit(q)
    r = np.sqrt(np.sum((y - q) ** 2, axis=-1))
    return params.omega * r**params.order * kernel_K(f, y, q, params) / 2 - 1


def remainder_g(f, q, params, spec=QuadratureSpec(), paper_coefficient=False):
    """Smooth remainder: sixth term minus its sphere value, plus the seventh term."""
    q = _unit(q)
    Y, W = _sphere_nodes(f.n, params.s, q, spec)
    T, _ = _seven(f, Y, q, params, paper_coefficient)
    d = np.sqrt(np.sum((Y - q) ** 2, axis=-1))
    sphere = np.sum(W * d ** (2 - params.order)) / (2 * params.s * params.omega)
    return float(np.sum(W * T[5]) - sphere + np.sum(W * T[6]))


def linear_part(f, q, params, spec=QuadratureSpec()):
    """``-int (f(y) - f(q)) K(y, q) dy`` on the symmetric pole rule."""
    q = _unit(q)
    Y, W = _sphere_nodes(f.n, params.s, q, spec)
    df = f(Y) - f(q[None])[0]
    return float(-np.sum(W * df * kernel_K(f, Y, q, params)))


def residual_Kf(f, q, params, spec=QuadratureSpec(), paper_coefficient=False, direct_spec=None):
    """``|lhs - rhs|`` of the linearized identity, lhs from the direct evaluator."""
    q = _unit(q)
    direct_spec = direct_spec or spec
    lhs = hs_boundary(f.to_shape(), q, params, direct_spec) - hs_boundary(Ball(np.zeros(f.n), 1.0), q, params,
                                                                          direct_spec)
    rhs = linear_part(f, q, params, spec) + remainder_g(f, q, params, spec, paper_coefficient)
    return abs(lhs - rhs)


def kernel_slope(f, q, params, radii=(1e-3, 1e-1), count=12, direction=None):
    """Log-log slope of ``K(y, q)`` against ``|y - q|`` along a geodesic from ``q``."""
    q = _unit(q)
    n = f.n
    if direction is None:
        from nlmc.quadrature import tangent_basis

        direction = tangent_basis(q)[0]
    rs = np.geomspace(radii[0], radii[1], count)
    # chord length |y-q| = 2 sin(r/2); step geodesically
    ang = 2 * np.arcsin(rs / 2)
    Y = np.cos(ang)[:, None] * q + np.sin(ang)[:, None] * direction
    K = kernel_K(f, Y, q, params)
    # average the two sides to remove the odd first-order term
    Y2 = np.cos(ang)[:, None] * q - np.sin(ang)[:, None] * direction
    K = 0.5 * (K + kernel_K(f, Y2, q, params))
    slope = np.polyfit(np.log(rs), np.log(K), 1)[0]
    return float(slope)


def pythagoras_defect(y, q):
    """``|(y - q).y - |y - q|^2 / 2|`` for unit vectors (zero up to rounding)."""
    y = np.atleast_2d(y)
    q = np.atleast_2d(q)
    return np.abs(np.sum((y - q) * y, axis=-1) - 0.5 * np.sum((y - q) ** 2, axis=-1))


__all__ = [
    "ExpansionTerms",
    "G_f",
    "RadialPerturbation",
    "expansion_terms",
    "gamma_f",
    "hs_radial_expansion",
    "kernel_K",
    "kernel_slope",
    "linear_part",
    "remainder_g",
    "residual_Kf",
    "v_q",
]
