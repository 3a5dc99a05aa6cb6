"""Deficits and stability quantities: delta_s, rho, eta_s and the explicit constants."""
import warnings
from dataclasses import asdict, dataclass, field
from math import sqrt

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from nlmc import _backend
from nlmc.curvature import CurvatureField, _Evaluator, hs_field, hs_gradient_fd
from nlmc.errors import ConfigError
from nlmc.geometry import measures as shape_measures
from nlmc.kernel import FracParams, omega
from nlmc.quadrature import QuadratureSpec, direction_set

GRADIENT_AGREEMENT = 2.0


def mesh_spacing(samples):
    """Largest nearest-neighbour distance among boundary nodes."""
    d, _ = cKDTree(samples.position).query(samples.position, k=2)
    return float(d[:, 1].max())


@dataclass
class DeficitResult:
    delta_s: float
    pair_sup: float
    gradient_sup: float
    h_min: float
    pair: tuple
    flagged: bool
    note: str = ""


def _spectral_gradient(fld):
    """|dH/ds| at every node of an n=2 field from the trapezoid grid (per component)."""
    S = fld.samples
    out = np.empty(len(S))
    for c in np.unique(S.component):
        idx = np.flatnonzero(S.component == c)
        H = fld.values[idx]
        N = H.size
        k = np.fft.rfftfreq(N, 1.0 / N)
        Hk = np.fft.rfft(H)
        if N % 2 == 0:
            Hk[-1] = 0.0
        dH = np.fft.irfft(1j * k * Hk, N)
        # area element of the trapezoid node: weight / (2 pi / N)
        J = S.weight[idx] * N / (2 * np.pi)
        out[idx] = np.abs(dH) / J
    return out


def gradient_sup(fld, shape, params, spec, count=48):
    """Estimate of ``sup |grad_T H_s|`` on the boundary.

    n=2: spectral differentiation of the trapezoid field.  n=3: fourth-order
    differences of the evaluator at ``count`` nodes spread over the field.
    """
    if shape.n == 2:
        return float(np.max(_spectral_gradient(fld)))
    S = fld.samples
    pick = np.unique(np.linspace(0, len(S) - 1, count).astype(int))
    ev = _Evaluator(shape, params, spec)
    best = 0.0
    for i in pick:
        g = hs_gradient_fd(shape, S.param[i], params, spec, int(S.component[i]), h=2e-2, evaluator=ev)
        best = max(best, float(np.linalg.norm(g)))
    return best


def lipschitz_deficit(fld, h_min=None, grad_sup=None, shape=None, params=None, spec=None):
    """Lipschitz seminorm of the field over node pairs at least ``h_min`` apart.

    The pairwise sup is cross-checked against a gradient estimate (given, or
    computed when ``shape``/``params`` are supplied); the larger is reported
    and the result is flagged when they differ by more than a factor 2.
    """
    S = fld.samples
    spacing = mesh_spacing(S)
    if h_min is None:
        h_min = 2.0 * spacing
    elif h_min < 2.0 * spacing * (1 - 1e-12):
        raise ConfigError(f"h_min={h_min:.3g} is below twice the mesh spacing ({2 * spacing:.3g})")
    best, i, j = _backend.lipschitz_sup(S.position, fld.values, h_min)
    if best < 0:
        raise ConfigError("no node pair is farther apart than h_min")
    if grad_sup is None and shape is not None and params is not None:
        grad_sup = gradient_sup(fld, shape, params, spec or QuadratureSpec(fld.resolution))
    g = float(grad_sup) if grad_sup is not None else float("nan")
    delta = best if not np.isfinite(g) else max(best, g)
    scale = max(best, g) if np.isfinite(g) else best
    flagged = bool(np.isfinite(g) and scale > 1e-9 * abs(np.mean(fld.values)) and
                   (min(best, g) <= 0 or max(best, g) / min(best, g) > GRADIENT_AGREEMENT))
    note = "pairwise and gradient estimates differ by more than 2x" if flagged else ""
    return DeficitResult(float(delta), float(best), g, float(h_min), (int(i), int(j)), flagged, note)


# ----------------------------------------------------------------- rho


@dataclass
class BallFit:
    rho: float
    center: np.ndarray
    r_in: float
    r_out: float
    converged: bool = True
    warning: str = ""


class _RadiusOracle:
    """min / max of |x - p| over the boundary, sampled and then polished locally."""

    def __init__(self, shape, spec):
        self.shape = shape
        self.S = shape.surface_quadrature(spec)
        self.n = shape.n

    def _param(self, a):
        if self.n == 2:
            return np.array([[np.cos(a[0]), np.sin(a[0])]])
        st = np.sin(a[0])
        return np.array([[st * np.cos(a[1]), st * np.sin(a[1]), np.cos(a[0])]])

    def _angles(self, u):
        if self.n == 2:
            return np.array([np.arctan2(u[1], u[0])])
        return np.array([np.arccos(np.clip(u[2], -1, 1)), np.arctan2(u[1], u[0])])

    def _polish(self, p, i, sign):
        comp = int(self.S.component[i])
        patch = self.shape.patches[comp]

        def f(a):
            x = patch.boundary(self._param(a))[0][0]
            return sign * float(np.linalg.norm(x - p))

        a0 = self._angles(self.S.param[i])
        if self.n == 2:
            h = 4 * np.pi / max(64, len(self.S))
            res = optimize.minimize_scalar(lambda t: f([t]), bounds=(a0[0] - h, a0[0] + h), method="bounded",
                                           options={"xatol": 1e-13})
            return sign * min(res.fun, f(a0))
        res = optimize.minimize(f, a0, method="Nelder-Mead",
                                options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 400,
                                         "initial_simplex": np.array([a0, a0 + [0.02, 0], a0 + [0, 0.02]])})
        return sign * min(res.fun, f(a0))

    def radii(self, p, polish=True):
        d = np.linalg.norm(self.S.position - p, axis=-1)
        i, j = int(np.argmin(d)), int(np.argmax(d))
        r_in, r_out = float(d[i]), float(d[j])
        if polish:
            r_in = min(r_in, self._polish(p, i, 1.0))
            r_out = max(r_out, self._polish(p, j, -1.0))
        inside = self.shape.signed_gap(p[None])[0] <= 0
        return (r_in if inside else -r_in), r_out


def ball_distance_rho(shape, spec=None, meas=None):
    """Normalized gap ``(r_out - r_in) / diam`` minimized over the common center.

    Multi-start Nelder-Mead over the center (barycenter, axis-perturbed starts
    and component centers), each start polished once more from its optimum.
    """
    n = shape.n
    spec = spec or QuadratureSpec(256 if n == 2 else 48)
    meas = meas or shape_measures(shape, QuadratureSpec(128 if n == 2 else 48))
    diam = meas.diameter
    oracle = _RadiusOracle(shape, spec)

    def obj(p, polish=False):
        r_in, r_out = oracle.radii(np.asarray(p), polish)
        return (r_out - r_in) / diam

    starts = [meas.barycenter]
    for k in range(n):
        e = np.zeros(n)
        e[k] = 0.25 * diam
        starts += [meas.barycenter + e, meas.barycenter - e]
    starts += [p.center for p in shape.patches]
    best = None
    stalled = False
    for x0 in starts:
        simplex = x0 + np.vstack([np.zeros(n), 0.05 * diam * np.eye(n)])
        res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "xatol": 1e-10 * diam, "fatol": 1e-12,
                                         "maxiter": 4000})
        # restart once from the optimum with a smaller simplex
        simplex = res.x + np.vstack([np.zeros(n), 1e-3 * diam * np.eye(n)])
        res2 = optimize.minimize(lambda p: obj(p, True), res.x, method="Nelder-Mead",
                                 options={"initial_simplex": simplex, "xatol": 1e-10 * diam, "fatol": 1e-12,
                                          "maxiter": 2000})
        stalled |= not res2.success
        if best is None or res2.fun < best.fun - 1e-14:
            best = res2
    c = best.x
    r_in, r_out = oracle.radii(c, True)
    rho = (r_out - r_in) / diam
    warn = "optimizer stagnated on at least one start" if stalled else ""
    if rho < 1e-12:
        rho = 0.0
    return BallFit(float(rho), c, float(r_in), float(r_out), not stalled, warn)


def verify_balls(shape, center, r_in, r_out, count=4000, seed=0, tol=1e-7):
    """Sampling check that ``B_{r_in} subset Omega subset B_{r_out}``."""
    rng = np.random.default_rng(seed)
    n = shape.n
    w = rng.normal(size=(count, n))
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    rad = rng.uniform(0, 1, count) ** (1.0 / n)
    inner = center + (r_in * (1 - tol)) * rad[:, None] * w
    ok_in = bool(np.all(shape.signed_gap(inner) <= tol * r_out)) if r_in > 0 else True
    S = shape.surface_quadrature(QuadratureSpec(256 if n == 2 else 48))
    ok_out = bool(np.all(np.linalg.norm(S.position - center, axis=-1) <= r_out * (1 + tol)))
    return ok_in and ok_out


# ------------------------------------------------------------ constants


def eta(diam, volume, delta_s, n, s):
    """``diam^{2n+2s+1} / |Omega|^2 * delta_s``."""
    if diam <= 0 or volume <= 0:
        raise ConfigError("diameter and volume must be positive")
    return diam ** (2 * n + 2 * s + 1) / volume**2 * delta_s


def paper_constants(params, diam, volume):
    """The explicit constants ``C1`` and ``C2`` of the one-direction and concentration bounds."""
    n, s = params.n, params.s
    c1 = 2.0 * sqrt(2.0 * omega(n) / (n + 2 * s))
    c2 = 4.0 * (n + 3) * diam ** (n + s + 1.5) / volume * c1
    return c1, c2


def delta_small_hypothesis(params, diam, volume, delta_s):
    """Smallness condition on ``delta_s`` behind the concentration bound; returns (holds, lhs, rhs)."""
    n, s = params.n, params.s
    lhs = diam ** (n + s + 0.5) / volume * sqrt(max(delta_s, 0.0))
    rhs = min(0.25, 1.0 / n) * sqrt((n + 2 * s) / (8 * omega(n)))
    return bool(lhs <= rhs), float(lhs), float(rhs)


# --------------------------------------------------------------- report


@dataclass
class StabilityReport:
    delta_s: float
    diam: float
    volume: float
    eta_s: float
    rho: float
    center_star: list
    r_in: float
    r_out: float
    c1: float
    c2: float
    bound_ratio: float
    lipschitz_cone_ok: bool
    pair_sup: float = 0.0
    gradient_sup: float = 0.0
    deficit_flagged: bool = False
    balls_verified: bool = True
    warnings: list = field(default_factory=list)

    def as_dict(self):
        d = asdict(self)
        d["center_star"] = [float(x) for x in self.center_star]
        return d


def cone_check(shape, center, r_in, count=None, steps=64, tol=1e-9):
    """Every boundary node sees its antipodal inner-sphere point (and a cone around it) inside the domain."""
    if r_in <= 0:
        return False
    n = shape.n
    S = shape.surface_quadrature(QuadratureSpec(128 if n == 2 else 24))
    X = S.position
    d = X - center
    dist = np.linalg.norm(d, axis=-1)
    u = d / dist[:, None]
    targets = [center - 0.999 * r_in * u]
    # two more generators of the cone: inner points orthogonal to the ray
    dirs = direction_set(n, 4 if n == 2 else 6)
    for v in dirs[:2]:
        perp = v - np.sum(v * u, axis=-1, keepdims=True) * u
        nrm = np.linalg.norm(perp, axis=-1, keepdims=True)
        perp = np.where(nrm > 1e-8, perp / np.maximum(nrm, 1e-300), 0.0)
        targets.append(center + 0.999 * r_in * perp)
    ts = np.linspace(0.0, 1.0, steps)[1:]
    scale = shape.circumradius()
    for T in targets:
        pts = X[:, None, :] + ts[None, :, None] * (T - X)[:, None, :]
        gap = shape.signed_gap(pts.reshape(-1, n))
        if np.any(gap > tol * scale):
            return False
    return True


def stability_report(shape, params, spec=QuadratureSpec(256), fld=None, workers=None):
    """Assemble the deficits, constants and the empirical stability ratio."""
    if params.eps != 0:
        raise ConfigError("stability report works with the exact kernel (eps = 0)")
    n = shape.n
    fld = fld or hs_field(shape, params, spec, workers=workers)
    meas = shape_measures(shape, QuadratureSpec(256 if n == 2 else 64))
    dres = lipschitz_deficit(fld, shape=shape, params=params, spec=spec)
    fit = ball_distance_rho(shape, meas=meas)
    e = eta(meas.diameter, meas.volume, dres.delta_s, n, params.s)
    c1, c2 = paper_constants(params, meas.diameter, meas.volume)
    ratio = 0.0 if (fit.rho == 0.0 or e == 0.0) else fit.rho / e
    warn = list(fld.warnings)
    if dres.flagged:
        warn.append(dres.note)
    if fit.warning:
        warn.append(fit.warning)
    return StabilityReport(
        delta_s=dres.delta_s,
        diam=meas.diameter,
        volume=meas.volume,
        eta_s=float(e),
        rho=fit.rho,
        center_star=list(map(float, fit.center)),
        r_in=fit.r_in,
        r_out=fit.r_out,
        c1=c1,
        c2=c2,
        bound_ratio=float(ratio),
        lipschitz_cone_ok=cone_check(shape, fit.center, fit.r_in),
        pair_sup=dres.pair_sup,
        gradient_sup=dres.gradient_sup,
        deficit_flagged=dres.flagged,
        balls_verified=verify_balls(shape, fit.center, fit.r_in, fit.r_out),
        warnings=warn,
    )


def loglog_slope(x, y):
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def ellipse_family(t, n=2):
    from nlmc.geometry import Ellipsoid

    axes = [1.0] * (n - 1) + [1.0 + t]
    return Ellipsoid(np.zeros(n), axes)


def stability_sweep(ts, params, spec=QuadratureSpec(256), family=ellipse_family, workers=None):
    """Reports over a one-parameter family plus the log-log slope of rho against eta_s."""
    rows = []
    for t in ts:
        rep = stability_report(family(t, params.n), params, spec, workers=workers)
        rows.append((float(t), rep))
    rhos = [r.rho for _, r in rows]
    etas = [r.eta_s for _, r in rows]
    ratios = [r.bound_ratio for _, r in rows]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        slope = loglog_slope(etas, rhos) if len(rows) > 1 and min(rhos) > 0 and min(etas) > 0 else float("nan")
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else float("inf")
    return rows, {"slope": slope, "ratio_spread": float(spread), "ratio_max": float(max(ratios))}


__all__ = [
    "BallFit",
    "CurvatureField",
    "DeficitResult",
    "FracParams",
    "StabilityReport",
    "ball_distance_rho",
    "cone_check",
    "delta_small_hypothesis",
    "ellipse_family",
    "eta",
    "lipschitz_deficit",
    "loglog_slope",
    "mesh_spacing",
    "paper_constants",
    "stability_report",
    "stability_sweep",
    "verify_balls",
]
