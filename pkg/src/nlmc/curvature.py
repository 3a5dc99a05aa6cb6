"""Nonlocal mean curvature evaluators.

``hs_boundary`` uses the boundary flux form with the exact kernel,

    H_s(p) = 1/(s omega) * int_{dOmega} (x-p).nu / |x-p|^{n+2s} dH,

and ``hs_volume_mollified`` the same flux form with ``psi_eps`` in place of
``-|t|^{-n-2s}/(2 s omega)``.  Both integrate over a rule rotated so that the
evaluation point sits at the pole.  ``hs_volume_form`` is an independent
discretization of the mollified curvature as a volume integral in polar
coordinates about ``p`` (convex single-patch shapes).
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import pi

import numpy as np

from nlmc import _backend
from nlmc.errors import ConfigError, DomainError
from nlmc.geometry import BoundarySamples
from nlmc.kernel import ExactKernel, FracParams, KernelProfile, MollifiedKernel, default_cutoff, sphere_measure
from nlmc.quadrature import (
    QuadratureSpec,
    global_rule,
    graded_panels,
    local_pole_rule,
    pole_rotation,
    rotate_rule,
    tangent_basis,
)

CHUNK = 16
SELFCHECK_TOL = 1e-6


def default_workers():
    try:
        return max(1, int(os.environ.get("NLMC_WORKERS", "1")))
    except ValueError:
        raise ConfigError("NLMC_WORKERS must be an integer") from None


def mollified_kernel(shape, params, truncated=False):
    """Mollified profile used by the evaluators.

    A finite cutoff drops the kernel mass of the far complement, which
    offsets ``H_eps`` by a constant that does not vanish as ``eps -> 0``;
    the evaluators therefore default to the untruncated profile.
    """
    R = default_cutoff(shape.circumradius()) if truncated else np.inf
    return MollifiedKernel(params, R)


def _resolve_kernel(shape, params, kernel):
    if kernel is not None:
        return kernel
    if params.eps > 0:
        return mollified_kernel(shape, params)
    return ExactKernel(params)


def _local_r_min(shape, comp, eps):
    return eps / (8.0 * shape.patches[comp].profile.bounds(shape.n)[1])


class _Evaluator:
    """Shared machinery: per-point pole rule for the own patch, global rule elsewhere."""

    def __init__(self, shape, params, spec, kernel=None, graded=None):
        if not isinstance(spec, QuadratureSpec):
            spec = QuadratureSpec(int(spec))
        self.shape = shape
        self.params = params
        self.spec = spec
        self.kernel = _resolve_kernel(shape, params, kernel)
        self.exact = isinstance(self.kernel, ExactKernel)
        n = shape.n
        self.rules = {}
        for c in range(len(shape.patches)):
            if self.exact and not graded:
                self.rules[c] = local_pole_rule(n, params.s, spec)
            else:
                # mollified kernels are smooth below eps; singular profiles get the full grading
                r_min = _local_r_min(shape, c, params.eps) if params.eps > 0 else None
                gspec = QuadratureSpec(spec.resolution, "graded", spec.pole_cap_radius, spec.cap_nodes,
                                       spec.outer_nodes, spec.panel_nodes)
                self.rules[c] = local_pole_rule(n, params.s, gspec, None if r_min is None else float(r_min))
        U, W = global_rule(n, spec.resolution)
        self.globals = []
        for p in shape.patches:
            x, nu, J = p.boundary(U)
            self.globals.append((x, nu, (W * J)[:, None] * nu, W * J))

    def local_nodes(self, U, comp):
        L, W, _ = self.rules[comp]
        R = pole_rotation(U)
        Ub = rotate_rule(L, R)
        B, K, n = Ub.shape
        x, nu, J = self.shape.patches[comp].boundary(Ub.reshape(-1, n))
        return x.reshape(B, K, n), nu.reshape(B, K, n), (np.broadcast_to(W, (B, K)) * J.reshape(B, K))

    # -- value
    def values(self, U, comps):
        U = np.atleast_2d(U)
        comps = np.broadcast_to(np.asarray(comps), (U.shape[0],))
        out = np.zeros(U.shape[0])
        for c in np.unique(comps):
            idx = np.flatnonzero(comps == c)
            P, _, _ = self.shape.patches[c].boundary(U[idx])
            X, NU, WJ = self.local_nodes(U[idx], c)
            acc = self._sum_local(P, X, NU, WJ)
            for j, (xg, nug, nwg, wg) in enumerate(self.globals):
                if j != c:
                    acc = acc + self._sum_global(P, xg, nug, nwg, wg)
            out[idx] = acc
        return out

    def _sum_local(self, P, X, NU, WJ):
        if self.exact:
            s = _backend.flux_sum_batched(P, X, NU * WJ[..., None], self.params.order)
            return s / (self.params.s * self.params.omega)
        D = X - P[:, None, :]
        t = np.sqrt(np.sum(D * D, axis=-1))
        return -2.0 * np.sum(self.kernel.psi(t) * np.sum(D * NU, axis=-1) * WJ, axis=-1)

    def _sum_global(self, P, xg, nug, nwg, wg):
        if self.exact:
            s = _backend.flux_sum_shared(P, xg, nwg, self.params.order)
            return s / (self.params.s * self.params.omega)
        D = xg[None] - P[:, None, :]
        t = np.sqrt(np.sum(D * D, axis=-1))
        return -2.0 * np.sum(self.kernel.psi(t) * np.sum(D * nug[None], axis=-1) * wg[None], axis=-1)

    # -- gradient (mollified only)
    def gradients(self, U, comps):
        U = np.atleast_2d(U)
        comps = np.broadcast_to(np.asarray(comps), (U.shape[0],))
        n = self.shape.n
        out = np.zeros((U.shape[0], n))
        for c in np.unique(comps):
            idx = np.flatnonzero(comps == c)
            P, NUp, _ = self.shape.patches[c].boundary(U[idx])
            X, NU, WJ = self.local_nodes(U[idx], c)
            g = self._grad_sum(P, X, NU, WJ)
            for j, (xg, nug, _, wg) in enumerate(self.globals):
                if j != c:
                    B = len(idx)
                    g = g + self._grad_sum(P, np.broadcast_to(xg, (B,) + xg.shape),
                                           np.broadcast_to(nug, (B,) + nug.shape),
                                           np.broadcast_to(wg, (B, wg.size)))
            # keep the tangential part only
            g = g - np.sum(g * NUp, axis=-1, keepdims=True) * NUp
            out[idx] = g
        return out

    def _grad_sum(self, P, X, NU, WJ):
        D = X - P[:, None, :]
        t = np.sqrt(np.sum(D * D, axis=-1))
        dn = np.sum(D * NU, axis=-1)
        a = self.kernel.psi(t) * WJ
        b = self.kernel.dpsi(t) / t * dn * WJ
        return 2.0 * (np.sum(a[..., None] * NU, axis=1) + np.sum(b[..., None] * D, axis=1))


def _map_chunks(fn, U, comps, workers):
    """Apply ``fn`` to fixed-size chunks; the worker count only changes scheduling."""
    M = U.shape[0]
    starts = list(range(0, M, CHUNK))
    jobs = [(U[a:a + CHUNK], comps[a:a + CHUNK]) for a in starts]
    if workers <= 1 or len(jobs) <= 1:
        parts = [fn(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda j: fn(*j), jobs))
    return np.concatenate(parts) if parts else np.zeros((0,))


def _check_exact(params):
    if params.eps != 0:
        raise ConfigError("hs_boundary uses the exact kernel; set eps = 0 or call hs_volume_mollified")


def hs_boundary(shape, p_param, params, spec=QuadratureSpec(), component=0, kernel=None):
    """Fractional mean curvature at the boundary point with parameter ``p_param``.

    Parameters
    ----------
    shape : Shape
    p_param : array_like
        Unit vector in the body frame of patch ``component``.
    params : FracParams
        ``eps`` must be 0.
    spec : QuadratureSpec
    kernel : KernelProfile, optional
        A general radial kernel; evaluated through its flux profile.
    """
    _check_exact(params)
    return float(hs_boundary_many(shape, np.atleast_2d(p_param), params, spec, component, kernel=kernel)[0])


def hs_boundary_many(shape, params_u, params, spec=QuadratureSpec(), components=0, workers=None, kernel=None):
    _check_exact(params)
    ev = _Evaluator(shape, params, spec, kernel=kernel, graded=kernel is not None)
    U = np.atleast_2d(np.asarray(params_u, dtype=float))
    comps = np.broadcast_to(np.asarray(components), (U.shape[0],)).copy()
    return _map_chunks(ev.values, U, comps, workers or default_workers())


def hs_volume_mollified(shape, p_param, params, spec=QuadratureSpec(), component=0):
    """Mollified curvature ``H_{s,eps}`` through the ``psi_eps`` flux form."""
    if params.eps <= 0:
        raise ConfigError("hs_volume_mollified needs eps > 0 (use hs_boundary for eps = 0)")
    ev = _Evaluator(shape, params, spec)
    return float(ev.values(np.atleast_2d(p_param), component)[0])


def hs_mollified_many(shape, params_u, params, spec=QuadratureSpec(), components=0, workers=None):
    if params.eps <= 0:
        raise ConfigError("mollified evaluation needs eps > 0")
    ev = _Evaluator(shape, params, spec)
    U = np.atleast_2d(np.asarray(params_u, dtype=float))
    comps = np.broadcast_to(np.asarray(components), (U.shape[0],)).copy()
    return _map_chunks(ev.values, U, comps, workers or default_workers())


def hs_tangential_gradient(shape, p_param, params, spec=QuadratureSpec(), component=0):
    """Tangential gradient of ``H_{s,eps}`` at a boundary point, as an ambient vector."""
    if params.eps <= 0:
        raise ConfigError("the gradient formula needs eps > 0")
    ev = _Evaluator(shape, params, spec)
    return ev.gradients(np.atleast_2d(p_param), component)[0]


def hs_gradient_many(shape, params_u, params, spec=QuadratureSpec(), components=0, workers=None):
    if params.eps <= 0:
        raise ConfigError("the gradient formula needs eps > 0")
    ev = _Evaluator(shape, params, spec)
    U = np.atleast_2d(np.asarray(params_u, dtype=float))
    comps = np.broadcast_to(np.asarray(components), (U.shape[0],)).copy()
    out = _map_chunks(lambda a, b: ev.gradients(a, b).ravel(), U, comps, workers or default_workers())
    return out.reshape(U.shape[0], shape.n)


def _curve_steps(u, h):
    """Parameter points displaced by +-h, +-2h along each tangent direction."""
    T = tangent_basis(u)
    pts = []
    for t in T:
        for k in (2, 1, -1, -2):
            if u.size == 2:
                a = np.arctan2(u[1], u[0]) + k * h
                pts.append(np.array([np.cos(a), np.sin(a)]))
            else:
                v = np.cos(k * h) * u + np.sin(k * h) * t
                pts.append(v / np.linalg.norm(v))
    return T, np.array(pts)


def hs_gradient_fd(shape, p_param, params, spec=QuadratureSpec(), component=0, h=1e-2, evaluator=None):
    """Tangential gradient by fourth-order differences along the boundary parametrization.

    Works for both the exact (``eps = 0``) and mollified curvatures.
    """
    u = np.asarray(p_param, dtype=float)
    T, pts = _curve_steps(u, h)
    ev = evaluator or _Evaluator(shape, params, spec)
    vals = ev.values(pts, component).reshape(len(T), 4)
    patch = shape.patches[component]
    xs = patch.boundary(pts)[0].reshape(len(T), 4, -1)
    c = np.array([-1.0, 8.0, -8.0, 1.0]) / (12 * h)
    dH = vals @ c
    dX = np.einsum("k,tkn->tn", c, xs)
    # solve dX^T g = dH within the tangent plane
    g, *_ = np.linalg.lstsq(dX, dH, rcond=None)
    return g


def hs_volume_form(shape, p_param, params, spec=QuadratureSpec(), component=0):
    """Mollified curvature as a volume integral in polar coordinates about ``p``.

    For a convex patch every ray entering the domain from ``p`` exits once at
    distance ``l(w)``, and the radial integral collapses to the flux tail:
    ``H_eps(p) = 2 * int_{w . nu < 0} Phi(l(w)) dw``.
    """
    if params.eps <= 0:
        raise ConfigError("volume form needs eps > 0")
    if len(shape.patches) != 1:
        raise ConfigError("volume form is implemented for single-patch convex shapes")
    kern = mollified_kernel(shape, params)
    patch = shape.patches[0]
    n = shape.n
    p, nu, _ = patch.boundary(np.atleast_2d(p_param))
    p, nu = p[0], nu[0]
    T = tangent_basis(nu)
    scale = 2 * patch.profile.bounds(n)[1]
    a_min = params.eps / (64 * scale)
    m = spec.panel_nodes
    if n == 2:
        a1, w1 = graded_panels(m, a_min, pi / 2)
        alpha = np.concatenate([a1, pi - a1[::-1]])
        wa = np.concatenate([w1, w1[::-1]])
        W = np.cos(alpha)[:, None] * T[0] - np.sin(alpha)[:, None] * nu
        wts = wa
    else:
        alpha, wa = graded_panels(m, a_min, pi / 2)
        nb = 2 * spec.resolution
        beta = 2 * pi * (np.arange(nb) + 0.5) / nb
        ca = np.cos(alpha)[:, None, None]
        dirs = np.cos(beta)[:, None] * T[0] + np.sin(beta)[:, None] * T[1]
        W = (ca * dirs[None] - np.sin(alpha)[:, None, None] * nu).reshape(-1, 3)
        wts = (wa * np.cos(alpha))[:, None].repeat(nb, 1).ravel() * (2 * pi / nb)
    ell = _exit_length(patch, p, W, scale)
    return float(2.0 * np.sum(wts * kern.flux_tail(ell)))


def _exit_length(patch, p, W, scale, iters=200):
    """Distance from boundary point ``p`` along inward directions ``W`` to the far boundary."""
    lo = np.zeros(W.shape[0])
    hi = np.full(W.shape[0], 2.0 * scale)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = patch.normal_gap(p + mid[:, None] * W) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(hi - lo < 1e-15 * scale):
            break
    return 0.5 * (lo + hi)


@dataclass
class CurvatureField:
    samples: BoundarySamples
    values: np.ndarray
    method: str
    resolution: int
    eps: float = 0.0
    warnings: list = field(default_factory=list)
    selfcheck: float = 0.0

    @property
    def summary(self):
        v = self.values
        return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean()), "std": float(v.std())}

    @property
    def relative_spread(self):
        s = self.summary
        return s["std"] / abs(s["mean"])


def hs_field(shape, params, spec=QuadratureSpec(), workers=None, selfcheck=True, kernel=None):
    """Curvature at every node of the global boundary rule."""
    if not isinstance(spec, QuadratureSpec):
        spec = QuadratureSpec(int(spec))
    S = shape.surface_quadrature(spec)
    if params.eps > 0:
        vals = hs_mollified_many(shape, S.param, params, spec, S.component, workers)
        method = f"volume_mollified({params.eps:g})"
    else:
        vals = hs_boundary_many(shape, S.param, params, spec, S.component, workers, kernel=kernel)
        method = "boundary"
    fld = CurvatureField(S, vals, method, spec.resolution, params.eps)
    if selfcheck and params.eps == 0 and kernel is None:
        # compare a few nodes against a rule with a doubled cap
        pick = np.linspace(0, len(S) - 1, 3).astype(int)
        fine = QuadratureSpec(spec.resolution, spec.pole_rule, spec.pole_cap_radius, 2 * spec.n_cap,
                              2 * spec.n_outer, spec.panel_nodes)
        ref = hs_boundary_many(shape, S.param[pick], params, fine, S.component[pick], 1)
        dev = float(np.max(np.abs(ref - vals[pick]) / np.abs(ref)))
        fld.selfcheck = dev
        if dev > SELFCHECK_TOL:
            fld.warnings.append(f"pole-cap refinement changes values by {dev:.2e}")
    return fld


def local_limit(shape, p_param, spec, s_list, n=None, component=0):
    """Pairs ``(s, (1 - 2s) H_s(p))`` for the given orders."""
    n = n or shape.n
    s_list = list(s_list)
    if any(b <= a for a, b in zip(s_list, s_list[1:])):
        raise ConfigError("s_list must be increasing")
    out = []
    for s in s_list:
        H = hs_boundary(shape, p_param, FracParams(n, s), spec, component)
        out.append((s, (1 - 2 * s) * H))
    return out


def sphere_value(n, s, radius=1.0):
    """Closed-form curvature of a round sphere of the given radius."""
    from scipy.special import gamma

    if n == 2:
        v = 2.0 ** (-1 - 2 * s) * np.sqrt(pi) * gamma(0.5 - s) / (s * gamma(1 - s))
    elif n == 3:
        v = 2.0 ** (-2 * s) / (s * (1 - 2 * s))
    else:
        raise DomainError("n must be 2 or 3")
    return v * radius ** (-2 * s)


__all__ = [
    "CurvatureField",
    "KernelProfile",
    "hs_boundary",
    "hs_boundary_many",
    "hs_field",
    "hs_gradient_fd",
    "hs_gradient_many",
    "hs_mollified_many",
    "hs_tangential_gradient",
    "hs_volume_form",
    "hs_volume_mollified",
    "local_limit",
    "sphere_measure",
    "sphere_value",
]
