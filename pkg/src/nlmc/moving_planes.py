"""Moving planes: reflections, critical hyperplanes and symmetric differences.

The plane ``{x . e = mu}`` sweeps down from ``Lambda_e = sup x.e``.  A
position is feasible when the reflected cap ``{x . e > mu}`` stays inside the
domain; containment of a smooth cap fails first on its reflected boundary,
so the test reflects the cap's boundary nodes only.
"""
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy import optimize

from nlmc.errors import ConfigError, GeometryError
from nlmc.geometry import measures as shape_measures
from nlmc.kernel import omega
from nlmc.quadrature import QuadratureSpec, direction_set
from nlmc.stability import delta_small_hypothesis, paper_constants

ANGLE_TOL = 1e-3
SCAN_STEPS = 400


@dataclass(frozen=True)
class PlaneConfig:
    e: np.ndarray
    mu: float

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        nrm = np.linalg.norm(e)
        if abs(nrm - 1.0) > 1e-12:
            raise ConfigError("plane direction must be a unit vector")
        object.__setattr__(self, "e", e)


def reflect(x, plane):
    """Mirror image ``x - 2 (x.e - mu) e``."""
    x = np.asarray(x, dtype=float)
    e = plane.e
    return x - 2.0 * (x @ e - plane.mu)[..., None] * e


@dataclass
class MovingPlanesOutcome:
    e: np.ndarray
    lam: float
    case_tag: str
    witness: np.ndarray
    Lambda_e: float
    tol: float
    symdiff_volume: float = float("nan")
    weighted_symdiff: float = float("nan")
    monotone_ok: bool = True
    extra: dict = field(default_factory=dict)


class _Planes:
    """Boundary node cache shared by all directions for one shape."""

    def __init__(self, shape, spec=None):
        n = shape.n
        spec = spec or QuadratureSpec(2048 if n == 2 else 96)
        S = shape.surface_quadrature(spec)
        self.shape = shape
        self.X = S.position
        self.NU = S.normal
        self.param = S.param
        self.comp = S.component
        self.spec = spec
        # typical node spacing: arc-length weight (n=2) or square root of the area weight
        w = float(np.median(S.weight))
        self.h = w if n == 2 else float(np.sqrt(w))
        self.scale = shape.circumradius()

    def support(self, e):
        """``sup x.e`` over the boundary, polished around the best node."""
        proj = self.X @ e
        i = int(np.argmax(proj))
        patch = self.shape.patches[int(self.comp[i])]
        n = self.shape.n
        u0 = self.param[i]

        if n == 2:
            a0 = np.arctan2(u0[1], u0[0])

            def f(a):
                return -float(patch.boundary(np.array([[np.cos(a), np.sin(a)]]))[0][0] @ e)

            h = 8 * np.pi / len(self.X)
            res = optimize.minimize_scalar(f, bounds=(a0 - h, a0 + h), method="bounded",
                                           options={"xatol": 1e-13})
            return max(float(proj[i]), -res.fun)

        def g(v):
            v = np.asarray(v, dtype=float)
            u = v / np.linalg.norm(v)
            return -float(patch.boundary(u[None])[0][0] @ e)

        res = optimize.minimize(g, u0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        return max(float(proj[i]), -res.fun)

    def failures(self, e, mu, tol):
        """Reflected cap nodes lying outside the domain beyond the ``2 tol`` band."""
        proj = self.X @ e
        cap = proj > mu
        if not np.any(cap):
            return np.zeros(0, dtype=int), np.zeros((0, self.X.shape[1]))
        idx = np.flatnonzero(cap)
        R = self.X[idx] - 2.0 * (proj[idx] - mu)[:, None] * e
        gap = self.shape.signed_gap(R)
        bad = gap > 2.0 * tol
        return idx[bad], R[bad]

    def feasible(self, e, mu, tol):
        return self.failures(e, mu, tol)[0].size == 0


def critical_lambda(shape, e, tol=None, spec=None, planes=None, steps=SCAN_STEPS):
    """Critical position of the moving plane in direction ``e``.

    The plane is scanned from the top until the first infeasible position,
    then that bracket is bisected to ``tol``.  The Case 1 / Case 2 label is a
    diagnosis at the critical position, not a certified dichotomy.
    """
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    pl = planes or _Planes(shape, spec)
    tol = tol if tol is not None else 1e-7 * pl.scale
    if tol <= 0:
        raise ConfigError("tol must be positive")
    top = pl.support(e)
    bottom = -pl.support(-e)
    if not np.isfinite(top) or not np.isfinite(bottom) or top <= bottom:
        raise GeometryError("could not bracket the domain along e")
    step = (top - bottom) / steps
    hi = top
    lo = None
    mu = top
    while mu > bottom:
        mu_next = mu - step
        if not pl.feasible(e, mu_next, tol):
            lo = mu_next
            break
        hi = mu_next
        mu = mu_next
    if lo is None:
        lo = bottom
        if pl.feasible(e, bottom, tol):
            hi = bottom
    monotone = True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pl.feasible(e, mid, tol):
            hi = mid
        else:
            lo = mid
    lam = hi
    # sampled monotonicity: everything between lam and the top stays feasible
    for m in np.linspace(lam, top, 9)[1:-1]:
        if not pl.feasible(e, m, tol):
            monotone = False
    tag, witness, info = _classify(pl, e, lam, lo, tol)
    return MovingPlanesOutcome(e, float(lam), tag, witness, float(top), float(tol), monotone_ok=monotone,
                               extra=info)


def _plane_crossings_2d(pl, e, lam):
    """Boundary points on the line ``x.e = lam`` (n=2), found by root bracketing on each patch."""
    pts = []
    for patch in pl.shape.patches:
        th = np.linspace(0, 2 * np.pi, 2049)
        U = np.stack([np.cos(th), np.sin(th)], 1)
        x, nu, _ = patch.boundary(U)
        g = x @ e - lam
        for k in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
            def f(a):
                return float(patch.boundary(np.array([[np.cos(a), np.sin(a)]]))[0][0] @ e - lam)

            a = optimize.brentq(f, th[k], th[k + 1], xtol=1e-14)
            xx, nn, _ = patch.boundary(np.array([[np.cos(a), np.sin(a)]]))
            pts.append((xx[0], nn[0]))
    return pts


def _classify(pl, e, lam, lo, tol):
    """Tangency (Case 1), orthogonality (Case 2), or both."""
    thresh = max(10.0 * tol, 4.0 * pl.h)
    idx, R = pl.failures(e, lo, tol)
    dist = np.abs(R @ e - lam) if R.size else np.zeros(0)
    case1 = bool(np.any(dist > thresh))
    witness = R[int(np.argmax(dist))] if case1 else None
    # orthogonality: some boundary point on the plane with |nu . e| small
    if pl.shape.n == 2:
        cross = _plane_crossings_2d(pl, e, lam)
        ortho_vals = [abs(float(nn @ e)) for _, nn in cross]
        ortho_pts = [xx for xx, _ in cross]
        atol = ANGLE_TOL
    else:
        near = np.abs(pl.X @ e - lam) <= 2 * pl.h
        ortho_vals = list(np.abs(pl.NU[near] @ e))
        ortho_pts = list(pl.X[near])
        atol = max(ANGLE_TOL, 2 * pl.h / pl.scale)
    case2 = bool(ortho_vals) and min(ortho_vals) <= atol
    if case2 and witness is None:
        witness = ortho_pts[int(np.argmin(ortho_vals))]
    if case1 and case2:
        tag = "both"
    elif case1:
        tag = "tangency"
    elif case2:
        tag = "orthogonality"
    else:
        tag = "undetermined"
        if idx.size:
            witness = R[0]
    info = {"case1_exit_distance": float(dist.max()) if dist.size else 0.0,
            "min_normal_dot": float(min(ortho_vals)) if ortho_vals else float("nan"),
            "threshold": thresh}
    if witness is None:
        witness = np.full(pl.shape.n, np.nan)
    return tag, np.asarray(witness, dtype=float), info


@dataclass
class SymdiffResult:
    volume: float
    volume_se: float
    weighted: float
    weighted_se: float
    samples: int
    seed: int


def _bounding_box(shape, plane):
    S = shape.surface_quadrature(QuadratureSpec(256 if shape.n == 2 else 48))
    P = np.vstack([S.position, reflect(S.position, plane)])
    pad = 1e-3 * shape.circumradius()
    return P.min(axis=0) - pad, P.max(axis=0) + pad


def symdiff_volume(shape, e, lam, samples=None, seed=0, batch=200_000):
    """Monte Carlo ``|Omega delta Omega'|`` and ``int_{Omega delta Omega'} dist(x, plane)``."""
    n = shape.n
    samples = int(samples or (1_000_000 if n == 2 else 4_000_000))
    plane = PlaneConfig(np.asarray(e, dtype=float) / np.linalg.norm(e), float(lam))
    lo, hi = _bounding_box(shape, plane)
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    s1 = s2 = w1 = w2 = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        x = lo + (hi - lo) * rng.random((m, n))
        a = shape.signed_gap(x) < 0
        b = shape.signed_gap(reflect(x, plane)) < 0
        ind = (a ^ b).astype(float)
        d = np.abs(x @ plane.e - plane.mu) * ind
        s1 += ind.sum()
        s2 += (ind * ind).sum()
        w1 += d.sum()
        w2 += (d * d).sum()
        done += m
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    wmean = w1 / samples
    wvar = max(w2 / samples - wmean * wmean, 0.0)
    return SymdiffResult(box * mean, box * sqrt(var / samples), box * wmean, box * sqrt(wvar / samples),
                         samples, seed)


def symdiff_grid(shape, e, lam, cells=2048):
    """Midpoint-grid version of :func:`symdiff_volume` (n=2), used as an oracle."""
    if shape.n != 2:
        raise ConfigError("grid oracle is two-dimensional")
    plane = PlaneConfig(np.asarray(e, dtype=float) / np.linalg.norm(e), float(lam))
    lo, hi = _bounding_box(shape, plane)
    xs = lo[0] + (np.arange(cells) + 0.5) * (hi[0] - lo[0]) / cells
    ys = lo[1] + (np.arange(cells) + 0.5) * (hi[1] - lo[1]) / cells
    cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) / cells**2
    vol = wsum = 0.0
    for y in np.array_split(ys, 16):
        X = np.stack(np.meshgrid(xs, y, indexing="ij"), -1).reshape(-1, 2)
        a = shape.signed_gap(X) < 0
        b = shape.signed_gap(reflect(X, plane)) < 0
        ind = a ^ b
        vol += ind.sum() * cell
        wsum += (np.abs(X[ind] @ plane.e - plane.mu)).sum() * cell
    return vol, wsum


@dataclass
class PropositionCheck:
    e: list
    lam: float
    symdiff: float
    symdiff_se: float
    bound_a: float
    margin_a: float
    weighted: float
    weighted_se: float
    bound_weighted: float
    margin_weighted: float
    ok: bool
    ratio_b: float
    case_tag: str


def check_prop_1direction(shape, e, params, delta_s, meas=None, samples=None, seed=0, outcome=None,
                          radii=None, planes=None):
    """Both one-direction bounds for the critical plane in direction ``e``.

    ``radii = (r, R)`` with ``B_r subset Omega subset B_R`` adds the ratio of the
    symmetric difference to ``sqrt(delta_s) sqrt(R - r)`` (constant not explicit).
    """
    n, s = params.n, params.s
    meas = meas or shape_measures(shape, QuadratureSpec(256 if n == 2 else 48))
    out = outcome or critical_lambda(shape, e, planes=planes)
    sd = symdiff_volume(shape, out.e, out.lam, samples, seed)
    c1, _ = paper_constants(params, meas.diameter, meas.volume)
    diam = meas.diameter
    bound_a = c1 * diam ** (n + s + 0.5) * sqrt(max(delta_s, 0.0))
    bound_w = omega(n) / (n + 2 * s) * diam ** (n + 2 * s + 2) * delta_s
    ma = bound_a - sd.volume
    mw = bound_w - sd.weighted
    ok = ma >= -3 * sd.volume_se and mw >= -3 * sd.weighted_se
    ratio_b = float("nan")
    if radii is not None and delta_s > 0 and radii[1] > radii[0]:
        ratio_b = sd.volume / (sqrt(delta_s) * sqrt(radii[1] - radii[0]))
    return PropositionCheck(list(map(float, out.e)), out.lam, sd.volume, sd.volume_se, bound_a, ma, sd.weighted,
                            sd.weighted_se, bound_w, mw, bool(ok), ratio_b, out.case_tag)


@dataclass
class ConcentrationReport:
    max_abs_lambda: float
    bound: float
    ratio: float
    hypothesis_ok: bool
    hypothesis_lhs: float
    hypothesis_rhs: float
    shift: list
    lambdas: list
    flag: str = ""


def critical_plane_concentration(shape, params, delta_s, direction_count=64, tol=None, meas=None, spec=None):
    """Largest critical-plane offset after centering the coordinate critical planes at the origin."""
    n = shape.n
    pl = _Planes(shape, spec)
    shift = np.array([critical_lambda(shape, np.eye(n)[k], tol, planes=pl).lam for k in range(n)])
    centered = shape.translated(-shift)
    pl = _Planes(centered, spec)
    meas = meas or shape_measures(centered, QuadratureSpec(256 if n == 2 else 48))
    lams = [critical_lambda(centered, e, tol, planes=pl).lam for e in direction_set(n, direction_count)]
    m = float(np.max(np.abs(lams)))
    _, c2 = paper_constants(params, meas.diameter, meas.volume)
    bound = c2 * sqrt(max(delta_s, 0.0))
    ok, lhs, rhs = delta_small_hypothesis(params, meas.diameter, meas.volume, delta_s)
    flag = "" if ok else "hypothesis not satisfied"
    ratio = m / bound if bound > 0 else (0.0 if m == 0 else float("inf"))
    return ConcentrationReport(m, float(bound), float(ratio), ok, lhs, rhs, list(map(float, shift)),
                               list(map(float, lams)), flag)


__all__ = [
    "ConcentrationReport",
    "MovingPlanesOutcome",
    "PlaneConfig",
    "PropositionCheck",
    "SymdiffResult",
    "check_prop_1direction",
    "critical_lambda",
    "critical_plane_concentration",
    "direction_set",
    "reflect",
    "symdiff_grid",
    "symdiff_volume",
]
