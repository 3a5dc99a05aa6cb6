"""Fractional kernel, its mollified family and the radial flux profile psi.

The exact kernel is ``1 / (omega_{n-2} r^{n+2s})``.  The mollified family is

    phi_eps(r) = (r^2 + eps^2)^{-(n+2s)/2} * chi(r / R_cut) / omega_{n-2}

with ``chi`` a smooth step equal to 1 on [0, 1/2] and 0 on [1, inf).  For any
radial profile ``k`` the flux profile

    psi(t) = -t^{-n} * int_t^inf k(tau) tau^{n-1} dtau

satisfies ``n psi + t psi' = k``, which turns volume integrals of ``k`` into
boundary integrals.
"""
from dataclasses import dataclass
from math import gamma, pi

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import beta, betaincc

from nlmc.errors import ConfigError, DomainError, NumericalError

S_STRICT_RANGE = (0.01, 0.49)


def omega(n):
    """Measure of the unit (n-2)-sphere: 2 for n=2, 2*pi for n=3."""
    if n == 2:
        return 2.0
    return 2.0 * pi ** ((n - 1) / 2) / gamma((n - 1) / 2)


def sphere_measure(n):
    """Measure of the unit (n-1)-sphere."""
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


@dataclass(frozen=True)
class FracParams:
    """Ambient dimension ``n``, fractional order ``s`` and mollification scale ``eps``.

    With ``strict`` (default) ``s`` must lie in [0.01, 0.49], where the
    quadrature tolerances are calibrated.
    """

    n: int
    s: float
    eps: float = 0.0
    strict: bool = True

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ConfigError(f"dimension n must be 2 or 3, got {self.n}")
        if not 0.0 < self.s < 0.5:
            raise ConfigError(f"fractional order must satisfy 0 < s < 1/2, got s={self.s}")
        lo, hi = S_STRICT_RANGE
        if self.strict and not lo <= self.s <= hi:
            raise ConfigError(
                f"strict mode requires {lo} <= s <= {hi}, got s={self.s}"
            )
        if self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")

    @property
    def omega(self):
        return omega(self.n)

    @property
    def order(self):
        """Kernel homogeneity n + 2s."""
        return self.n + 2.0 * self.s

    def with_eps(self, eps):
        return FracParams(self.n, self.s, eps, self.strict)

    def with_s(self, s):
        return FracParams(self.n, s, self.eps, self.strict)


def kernel_value(r, params):
    """Exact fractional kernel ``1 / (omega r^{n+2s})``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kernel_value needs r > 0")
    out = r ** (-params.order) / params.omega
    return out if out.ndim else float(out)


def _bump(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_cutoff(x):
    """C-infinity step: 1 on [0, 1/2], 0 on [1, inf), decreasing between."""
    x = np.asarray(x, dtype=float)
    a = _bump(1.0 - x)
    b = _bump(x - 0.5)
    return a / (a + b)


def smooth_cutoff_deriv(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    mid = (x > 0.5) & (x < 1.0)
    if np.any(mid):
        t1 = 1.0 - x[mid]
        t2 = x[mid] - 0.5
        a = np.exp(-1.0 / t1)
        b = np.exp(-1.0 / t2)
        da = -a / t1**2
        db = b / t2**2
        out[mid] = (da * b - a * db) / (a + b) ** 2
    return out


class KernelProfile:
    """Radial kernel ``k`` together with its flux profile ``psi``.

    Subclasses provide ``phi``, ``dphi`` and ``flux_tail`` (the integral
    ``Phi(t) = int_t^inf k tau^{n-1} dtau``); ``psi`` and its derivatives
    follow from the identity ``n psi + t psi' = k``.
    """

    kind = "general"
    n = 2
    cutoff_radius = np.inf

    def phi(self, r):
        raise NotImplementedError

    def dphi(self, r):
        raise NotImplementedError

    def flux_tail(self, t):
        raise NotImplementedError

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("psi needs t > 0")
        return -self.flux_tail(t) / t**self.n

    def dpsi(self, t):
        t = np.asarray(t, dtype=float)
        return (self.phi(t) - self.n * self.psi(t)) / t

    def d2psi(self, t):
        t = np.asarray(t, dtype=float)
        p = self.psi(t)
        dp = (self.phi(t) - self.n * p) / t
        return (self.dphi(t) - (self.n + 1) * dp) / t

    def psi_direct(self, t, epsabs=1e-10):
        """psi by adaptive quadrature of the defining tail integral (validation path)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t <= 0):
            raise DomainError("psi needs t > 0")
        out = np.empty_like(t)
        R = self.cutoff_radius
        for i, ti in enumerate(t):
            if ti >= R:
                out[i] = 0.0
                continue

            def f(tau):
                return float(self.phi(np.array([tau]))[0]) * tau ** (self.n - 1)

            pts = [p for p in (0.5 * R,) if ti < p < R]
            val, err, info = _quad_checked(f, ti, R, pts, epsabs)
            out[i] = -val / ti**self.n
        return out


def _quad_checked(f, a, b, points, epsabs):
    val, err, info = integrate.quad(
        f, a, b, points=points or None, epsabs=epsabs, epsrel=1e-12, limit=400, full_output=1
    )[:3]
    if err > max(epsabs, 1e-8 * abs(val)) * 100:
        raise NumericalError(
            "radial tail integration did not converge",
            {"a": a, "b": b, "estimate": val, "error": err, "neval": info.get("neval")},
        )
    return val, err, info


class ExactKernel(KernelProfile):
    """Unmollified kernel; psi(t) = -t^{-n-2s} / (2 s omega)."""

    kind = "fractional"

    def __init__(self, params):
        self.params = params
        self.n = params.n

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (-self.params.order) / self.params.omega

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        p = self.params
        return -p.order * r ** (-p.order - 1) / p.omega

    def flux_tail(self, t):
        p = self.params
        return np.asarray(t, dtype=float) ** (-2 * p.s) / (2 * p.s * p.omega)


class MollifiedKernel(KernelProfile):
    """The concrete mollified family ``phi_eps`` with compact support radius ``R_cut``.

    ``flux_tail`` uses the closed form of the core integral in terms of the
    regularized incomplete beta function; only the cutoff shell
    ``[R_cut/2, R_cut]`` needs quadrature, done once per instance.
    ``cutoff_radius=inf`` gives the untruncated profile, whose flux tail is
    entirely closed form.
    """

    kind = "fractional"

    def __init__(self, params, cutoff_radius):
        if params.eps <= 0:
            raise DomainError("mollified kernel needs eps > 0")
        if cutoff_radius <= 0:
            raise ConfigError("cutoff radius must be positive")
        self.params = params
        self.n = params.n
        self.eps = params.eps
        self.cutoff_radius = float(cutoff_radius)
        self._a = 0.5 * params.order
        if np.isfinite(self.cutoff_radius):
            self._shell = self._tail_from(0.5 * self.cutoff_radius)
            self._wR = self._w(0.5 * self.cutoff_radius)
        else:
            self._shell, self._wR = 0.0, 1.0

    def _core(self, r):
        return (r * r + self.eps**2) ** (-self._a) / self.params.omega

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("phi_eps needs r >= 0")
        if not np.isfinite(self.cutoff_radius):
            return self._core(r)
        return self._core(r) * smooth_cutoff(r / self.cutoff_radius)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        R = self.cutoff_radius
        core = self._core(r)
        dcore = -2 * self._a * r * (r * r + self.eps**2) ** (-self._a - 1) / self.params.omega
        if not np.isfinite(R):
            return dcore
        return dcore * smooth_cutoff(r / R) + core * smooth_cutoff_deriv(r / R) / R

    def _w(self, t):
        t2 = np.asarray(t, dtype=float) ** 2
        return t2 / (t2 + self.eps**2)

    def _tail_from(self, t0):
        R = self.cutoff_radius

        def f(tau):
            return float(self.phi(np.array([tau]))[0]) * tau ** (self.n - 1)

        return _quad_checked(f, t0, R, [], 1e-14)[0]

    def flux_tail(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        p = self.params
        out = np.empty_like(t)
        inner = t <= 0.5 * self.cutoff_radius
        if np.any(inner):
            # int_t^{R/2} (tau^2+eps^2)^{-a} tau^{n-1} dtau
            #   = eps^{-2s}/2 * B(n/2, s) * [Ic_{w(t)} - Ic_{w(R/2)}]
            pref = 0.5 * self.eps ** (-2 * p.s) * beta(0.5 * self.n, p.s)
            ic = betaincc(0.5 * self.n, p.s, self._w(t[inner]))
            icR = betaincc(0.5 * self.n, p.s, self._wR)
            out[inner] = pref * (ic - icR) / p.omega + self._shell
        for i in np.flatnonzero(~inner):
            out[i] = 0.0 if t[i] >= self.cutoff_radius else self._tail_from(t[i])
        return out[0] if scalar else out

    def total_mass(self):
        """``int_{R^n} phi_eps`` (finite because of the mollification)."""
        p = self.params
        core = 0.5 * self.eps ** (-2 * p.s) * beta(0.5 * self.n, p.s) * (1.0 - betaincc(0.5 * self.n, p.s, self._wR))
        return sphere_measure(self.n) * (core / p.omega + self._shell)


class GeneralKernel(KernelProfile):
    """User radial profile ``k(t)``; the flux tail is tabulated once and spline-interpolated.

    ``k`` should be positive and decreasing, and behave like ``t^{-(n+2s)}``
    near zero for the pole-adapted boundary rule to stay accurate.
    """

    def __init__(self, k, n, cutoff_radius, dk=None, t_min=1e-6, table_size=600):
        self.k = k
        self.dk = dk
        self.n = n
        self.cutoff_radius = float(cutoff_radius)
        grid = np.geomspace(t_min, self.cutoff_radius, table_size)
        vals = np.zeros_like(grid)

        def f(tau):
            return float(k(tau)) * tau ** (n - 1)

        # cumulative from the top keeps each piece short
        acc = 0.0
        for i in range(table_size - 2, -1, -1):
            acc += integrate.quad(f, grid[i], grid[i + 1], epsabs=0, epsrel=1e-13, limit=200)[0]
            vals[i] = acc
        self._t_min = t_min
        self._top = vals[-2] if table_size > 1 else 0.0
        pos = vals[:-1] > 0
        self._spline = CubicSpline(np.log(grid[:-1][pos]), np.log(vals[:-1][pos]))
        self._t_last = grid[:-1][pos][-1]

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return np.vectorize(lambda x: float(self.k(x)))(r)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        if self.dk is not None:
            return np.vectorize(lambda x: float(self.dk(x)))(r)
        h = 1e-6 * r
        return (self.phi(r + h) - self.phi(r - h)) / (2 * h)

    def flux_tail(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        shape = t.shape
        t = np.atleast_1d(t).ravel()
        out = np.zeros_like(t)
        tab = (t >= self._t_min) & (t <= self._t_last)
        out[tab] = np.exp(self._spline(np.log(t[tab])))
        for i in np.flatnonzero(~tab & (t < self.cutoff_radius)):
            out[i] = _quad_checked(
                lambda tau: float(self.k(tau)) * tau ** (self.n - 1), t[i], self.cutoff_radius, [], 1e-12
            )[0]
        return out[0] if scalar else out.reshape(shape)


def default_cutoff(shape_radius):
    """Cutoff radius used for a shape whose circumradius about its center is ``shape_radius``."""
    return 8.0 * float(shape_radius)


def phi_eps(r, params, cutoff_radius=10.0):
    """Mollified kernel value; thin functional wrapper over :class:`MollifiedKernel`."""
    return MollifiedKernel(params, cutoff_radius).phi(r)


def psi_eps(r, params, cutoff_radius=10.0):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("psi_eps needs r > 0")
    return MollifiedKernel(params, cutoff_radius).psi(r)
