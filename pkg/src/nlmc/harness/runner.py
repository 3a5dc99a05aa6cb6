"""Experiment dispatch and deterministic artifact writing.

A report is a plain JSON-ready mapping.  Everything that may differ between
two runs of one config (wall time, worker count, start time) goes to a
separate ``meta.json`` so ``report.json`` and the tables stay byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np
import scipy

from nlmc import __version__
from nlmc._backend import BACKEND
from nlmc.curvature import (
    default_workers,
    hs_boundary,
    hs_field,
    hs_mollified_many,
    local_limit,
    sphere_value,
)
from nlmc.errors import NLMCError
from nlmc.geometry import Ball, BallUnion, Ellipsoid, StarShape
from nlmc.harness.config import RunConfig, config_echo
from nlmc.kernel import FracParams
from nlmc.quadrature import QuadratureSpec, direction_set
from nlmc.stability import ellipse_family, lipschitz_deficit, loglog_slope, stability_report, stability_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class RunReport:
    report: dict
    meta: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    files: list = field(default_factory=list)


class _Ctx:
    """Per-run helpers plus the warning and timing sinks."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        q = cfg.quadrature
        self.spec = QuadratureSpec(q.N, q.pole_rule, q.pole_cap_radius)
        self.params = FracParams(cfg.params.n, cfg.params.s)
        self.workers = cfg.workers or default_workers()
        self.numerical = []
        self.notes = []
        self.timing = {}
        self.table = None
        self.series = {}

    def shape(self, t=None):
        sb = self.cfg.shape
        n = self.cfg.params.n
        if sb.kind == "ball":
            return Ball(sb.center, sb.radius)
        if sb.kind == "ellipsoid":
            return Ellipsoid(sb.center, sb.semi_axes)
        if sb.kind == "star":
            return StarShape(sb.center, [tuple(x) for x in sb.terms], radius=sb.radius or 1.0)
        if sb.kind == "ball_union":
            return BallUnion([Ball(b.center, b.radius) for b in sb.balls])
        return ellipse_family(sb.t if t is None else t, n)

    def point(self):
        p = np.zeros(self.cfg.params.n)
        if self.cfg.point is None:
            p[0] = 1.0
        else:
            p[:] = self.cfg.point
        return p / np.linalg.norm(p)

    def timed(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        self.timing[name] = self.timing.get(name, 0.0) + time.perf_counter() - t0
        return out

    def field(self, shape):
        fld = self.timed("field", hs_field, shape, self.params, self.spec, workers=self.workers)
        if fld.selfcheck > self.cfg.warning_threshold:
            self.numerical.append({"code": "pole_cap_refinement", "value": fld.selfcheck,
                                   "threshold": self.cfg.warning_threshold})
        return fld

    def set_table(self, columns, rows):
        self.table = {"columns": list(columns), "rows": [list(r) for r in rows]}

    def add_series(self, name, columns, rows):
        self.series[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}


# ------------------------------------------------------------- experiments


def _exp_curvature(ctx):
    shape = ctx.shape()
    p = ctx.point()
    val = ctx.timed("curvature", hs_boundary, shape, p, ctx.params, ctx.spec)
    out = {"point_param": p, "value": val}
    if isinstance(shape, Ball):
        ref = sphere_value(shape.n, ctx.params.s, shape.radius)
        out["oracle"] = ref
        out["relative_error"] = abs(val - ref) / abs(ref)
    if ctx.cfg.params.eps:
        moll = []
        for e in ctx.cfg.params.eps:
            v = ctx.timed("mollified", hs_mollified_many, shape, p[None], ctx.params.with_eps(e), ctx.spec,
                          0, ctx.workers)[0]
            moll.append({"eps": e, "value": v, "error": abs(v - val)})
        out["mollified"] = moll
        ctx.add_series("eps_convergence", ["eps", "abs_error"], [(m["eps"], m["error"]) for m in moll])
    if ctx.cfg.params.s_list:
        _local_limit_into(ctx, shape, p, out)
    return out


def _local_limit_into(ctx, shape, p, out):
    pairs = ctx.timed("local_limit", local_limit, shape, p, ctx.spec, ctx.cfg.params.s_list)
    out["local_limit"] = [{"s": s, "scaled_value": v} for s, v in pairs]
    ctx.add_series("local_limit", ["s", "(1-2s)H_s"], pairs)
    ctx.set_table(["s", "scaled_value"], pairs)


def _field_table(ctx, fld):
    S = fld.samples
    n = S.position.shape[1]
    cols = ["index", "component"] + ["x", "y", "z"][:n] + ["H_s"]
    rows = [[i, int(S.component[i]), *S.position[i], fld.values[i]] for i in range(len(fld.values))]
    ctx.set_table(cols, rows)


def _field_summary(fld):
    return {"nodes": len(fld.values), "method": fld.method, "resolution": fld.resolution,
            "summary": fld.summary, "relative_spread": fld.relative_spread,
            "max_minus_min": fld.summary["max"] - fld.summary["min"], "selfcheck": fld.selfcheck}


def _exp_field(ctx):
    fld = ctx.field(ctx.shape())
    _field_table(ctx, fld)
    return _field_summary(fld)


def _deficit(ctx, shape, fld):
    d = ctx.timed("deficit", lipschitz_deficit, fld, shape=shape, params=ctx.params, spec=ctx.spec)
    if d.flagged:
        ctx.notes.append(d.note)
    return d


def _exp_deficit(ctx):
    shape = ctx.shape()
    fld = ctx.field(shape)
    d = _deficit(ctx, shape, fld)
    _field_table(ctx, fld)
    return {"field": _field_summary(fld), "delta_s": d.delta_s, "pair_sup": d.pair_sup,
            "gradient_sup": d.gradient_sup, "h_min": d.h_min, "flagged": d.flagged}


def _exp_stability(ctx):
    shape = ctx.shape()
    fld = ctx.field(shape)
    rep = ctx.timed("stability", stability_report, shape, ctx.params, ctx.spec, fld=fld, workers=ctx.workers)
    ctx.notes.extend(w for w in rep.warnings if not w.startswith("pole-cap"))
    return rep.as_dict()


def _exp_moving_planes(ctx):
    from nlmc.moving_planes import _Planes, check_prop_1direction, critical_lambda
    from nlmc.stability import ball_distance_rho

    shape = ctx.shape()
    fld = ctx.field(shape)
    d = _deficit(ctx, shape, fld)
    mp = ctx.cfg.moving_planes
    fit = ctx.timed("ball_fit", ball_distance_rho, shape)
    pl = _Planes(shape)
    rows, checks = [], []
    for i, e in enumerate(direction_set(shape.n, mp.directions)):
        out = ctx.timed("critical_lambda", critical_lambda, shape, e, mp.tol, planes=pl)
        c = ctx.timed("symdiff", check_prop_1direction, shape, e, ctx.params, d.delta_s, samples=mp.samples,
                      seed=ctx.cfg.seed + i, outcome=out, radii=(fit.r_in, fit.r_out))
        checks.append(c)
        rows.append([i, *c.e, c.lam, c.case_tag, c.symdiff, c.symdiff_se, c.bound_a, c.weighted, c.weighted_se,
                     c.bound_weighted, int(c.ok)])
    ecols = ["e_x", "e_y", "e_z"][:shape.n]
    ctx.set_table(["index", *ecols, "lambda", "case", "symdiff", "symdiff_se", "bound_a", "weighted",
                   "weighted_se", "bound_weighted", "ok"], rows)
    return {"delta_s": d.delta_s, "directions": [asdict(c) for c in checks], "all_ok": all(c.ok for c in checks),
            "min_margin_a": min(c.margin_a for c in checks),
            "min_margin_weighted": min(c.margin_weighted for c in checks)}


def _exp_concentration(ctx):
    from nlmc.moving_planes import critical_plane_concentration

    shape = ctx.shape()
    fld = ctx.field(shape)
    d = _deficit(ctx, shape, fld)
    mp = ctx.cfg.moving_planes
    rep = ctx.timed("concentration", critical_plane_concentration, shape, ctx.params, d.delta_s,
                    mp.directions, mp.tol)
    if rep.flag:
        ctx.notes.append(rep.flag)
    dirs = direction_set(shape.n, mp.directions)
    ctx.set_table(["index", *["e_x", "e_y", "e_z"][:shape.n], "lambda"],
                  [[i, *dirs[i], lam] for i, lam in enumerate(rep.lambdas)])
    out = asdict(rep)
    out["delta_s"] = d.delta_s
    out["bound_holds"] = rep.ratio <= 1.0
    return out


def _exp_radial_graph(ctx):
    from nlmc.radial_graph import (
        RadialPerturbation,
        hs_radial_expansion,
        kernel_slope,
        remainder_g,
        residual_Kf,
    )

    rb = ctx.cfg.radial
    n = ctx.params.n
    f = RadialPerturbation(n, [tuple(t) for t in rb.terms], rb.constant)
    q = np.zeros(n)
    if rb.point is None:
        q[0] = 1.0
    else:
        q[:] = rb.point
    q = q / np.linalg.norm(q)
    spec2 = QuadratureSpec(2 * ctx.spec.resolution, ctx.spec.pole_rule, ctx.spec.pole_cap_radius)
    expn = ctx.timed("expansion", hs_radial_expansion, f, q, ctx.params, ctx.spec)
    direct = ctx.timed("direct", hs_boundary, f.to_shape(), q, ctx.params, ctx.spec)
    sph = sphere_value(n, ctx.params.s)
    r1 = ctx.timed("residual", residual_Kf, f, q, ctx.params, ctx.spec)
    r2 = ctx.timed("residual", residual_Kf, f, q, ctx.params, spec2)
    slope = kernel_slope(f, q, ctx.params)
    return {"q": q, "expansion": expn, "direct": direct, "relative_difference": abs(expn - direct) / abs(direct),
            "sphere_value": sph, "remainder_g": remainder_g(f, q, ctx.params, ctx.spec),
            "residual": r1, "residual_relative": r1 / sph, "residual_refined": r2,
            "residual_ratio": (r1 / r2) if r2 > 0 else math.inf, "kernel_slope": slope,
            "kernel_slope_expected": -(n + 2 * ctx.params.s)}


def _exp_sweep(ctx):
    sw = ctx.cfg.sweep
    vals = list(sw.values)
    if sw.parameter == "t":
        rows, summ = ctx.timed("sweep", stability_sweep, vals, ctx.params, ctx.spec, workers=ctx.workers)
        table = [(t, r.delta_s, r.rho, r.eta_s, r.bound_ratio) for t, r in rows]
        ctx.set_table(["t", "delta_s", "rho", "eta_s", "ratio"], table)
        ctx.add_series("stability_loglog", ["log_eta_s", "log_rho"],
                       [(math.log(r.eta_s), math.log(r.rho)) for _, r in rows if r.eta_s > 0 and r.rho > 0])
        for _, r in rows:
            ctx.notes.extend(w for w in r.warnings if not w.startswith("pole-cap"))
        return {"parameter": "t", "summary": summ, "reports": [{"t": t, **r.as_dict()} for t, r in rows]}
    shape = ctx.shape()
    p = ctx.point()
    if sw.parameter == "s":
        out = {"parameter": "s"}
        ctx.cfg = ctx.cfg.model_copy(update={"params": ctx.cfg.params.model_copy(update={"s_list": vals})})
        _local_limit_into(ctx, shape, p, out)
        return out
    if sw.parameter == "eps":
        S = shape.surface_quadrature(ctx.spec)
        pick = np.arange(0, len(S), max(1, len(S) // 32))
        U, comps = S.param[pick], S.component[pick]
        from nlmc.curvature import hs_boundary_many

        exact = ctx.timed("field", hs_boundary_many, shape, U, ctx.params, ctx.spec, comps, ctx.workers)
        rows = []
        for e in vals:
            m = ctx.timed("mollified", hs_mollified_many, shape, U, ctx.params.with_eps(e), ctx.spec, comps,
                          ctx.workers)
            rows.append((e, float(np.max(np.abs(m - exact) / np.abs(exact)))))
        ctx.set_table(["eps", "sup_rel_error"], rows)
        ctx.add_series("eps_convergence", ["eps", "sup_rel_error"], rows)
        slope = loglog_slope([r[0] for r in rows], [r[1] for r in rows]) if len(rows) > 1 else math.nan
        return {"parameter": "eps", "points": len(pick), "rows": rows, "rate": slope}
    # resolution
    rows = []
    for N in vals:
        sp = QuadratureSpec(int(N), ctx.spec.pole_rule, ctx.spec.pole_cap_radius)
        rows.append((int(N), ctx.timed("curvature", hs_boundary, shape, p, ctx.params, sp)))
    diffs = [abs(b[1] - a[1]) for a, b in zip(rows, rows[1:])]
    ctx.set_table(["N", "value"], rows)
    return {"parameter": "N", "rows": rows, "successive_differences": diffs}


_DISPATCH = {
    "curvature": _exp_curvature,
    "field": _exp_field,
    "deficit": _exp_deficit,
    "stability": _exp_stability,
    "moving-planes": _exp_moving_planes,
    "concentration": _exp_concentration,
    "radial-graph": _exp_radial_graph,
    "sweep": _exp_sweep,
}


# ----------------------------------------------------------------- output


def _clean(x):
    """JSON-ready copy: numpy scalars and arrays unwrapped, non-finite floats as null."""
    if is_dataclass(x) and not isinstance(x, type):
        x = asdict(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _versions():
    return {"nlmc": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "backend": BACKEND,
            "python": platform.python_version()}


def dumps(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_text(table) -> str:
    buf = io.StringIO()
    buf.write("# " + ",".join(table["columns"]) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in table["rows"]:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run(cfg: RunConfig) -> RunReport:
    """Execute one experiment; never raises for library errors (they map to exit codes)."""
    ctx = _Ctx(cfg)
    t0 = time.perf_counter()
    code = EXIT_OK
    error = None
    try:
        results = _DISPATCH[cfg.experiment](ctx)
    except NLMCError as err:
        results = None
        code = err.code if err.code in (EXIT_CONFIG, EXIT_NUMERICAL) else EXIT_NUMERICAL
        error = {"type": type(err).__name__, "message": str(err),
                 "diagnostics": getattr(err, "diagnostics", {})}
    if code == EXIT_OK and ctx.numerical:
        code = EXIT_NUMERICAL
    report = {
        "schema": 1,
        "experiment": cfg.experiment,
        "config": config_echo(cfg),
        "results": results,
        "numerical_warnings": ctx.numerical,
        "notes": ctx.notes,
        "error": error,
        "exit_code": code,
        "versions": _versions(),
    }
    if ctx.table is not None:
        report["table"] = ctx.table
    if ctx.series:
        report["series"] = ctx.series
    meta = {"timing_s": {k: round(v, 6) for k, v in sorted(ctx.timing.items())},
            "wall_s": time.perf_counter() - t0, "workers": ctx.workers,
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    return RunReport(_clean(report), meta, code)


def emit_plotdata(report: dict, out_dir) -> list:
    """Write each series as ``<name>.dat``: a ``#`` header line then whitespace-separated columns."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, ser in sorted((report.get("series") or {}).items()):
        path = out_dir / f"{name}.dat"
        lines = ["# " + " ".join(ser["columns"])]
        lines += [" ".join(_fmt(v) for v in row) for row in ser["rows"]]
        path.write_text("\n".join(lines) + "\n")
        files.append(str(path))
    return files


def write_outputs(rr: RunReport, cfg: RunConfig, out_dir=None) -> list:
    out = Path(out_dir or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    p = out / cfg.output.report
    p.write_text(dumps(rr.report))
    files.append(str(p))
    if rr.report.get("table"):
        p = out / cfg.output.csv
        p.write_text(table_text(rr.report["table"]))
        files.append(str(p))
    if cfg.output.plots:
        files += emit_plotdata(rr.report, out)
    p = out / "meta.json"
    p.write_text(json.dumps(rr.meta, indent=2, sort_keys=True) + "\n")
    files.append(str(p))
    rr.files = files
    return files
