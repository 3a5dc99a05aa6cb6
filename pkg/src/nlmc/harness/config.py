"""Run configuration: a YAML document validated against a strict schema."""
from __future__ import annotations

import copy
from math import pi
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from nlmc.errors import ConfigError
from nlmc.kernel import S_STRICT_RANGE

SCHEMA_VERSION = 1
EXPERIMENTS = ("curvature", "field", "deficit", "stability", "moving-planes", "concentration", "radial-graph",
               "sweep")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BallSpec(_Strict):
    center: list[float]
    radius: float = Field(gt=0)


class ShapeBlock(_Strict):
    """One shape; ``kind`` decides which of the remaining fields apply.

    ``ellipse_family`` is the axis-aligned ellipsoid with semi-axes
    ``(1, ..., 1, 1 + t)`` whose dimension follows ``params.n``.
    """

    kind: Literal["ball", "ellipsoid", "star", "ball_union", "ellipse_family"]
    center: list[float] | None = None
    radius: float | None = Field(default=None, gt=0)
    semi_axes: list[float] | None = None
    terms: list[list[float]] | None = None
    balls: list[BallSpec] | None = None
    t: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _fields_for_kind(self):
        need = {
            "ball": ("center", "radius"),
            "ellipsoid": ("center", "semi_axes"),
            "star": ("center", "terms"),
            "ball_union": ("balls",),
            "ellipse_family": ("t",),
        }[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"shape kind '{self.kind}' requires {', '.join(missing)}")
        return self


class ParamsBlock(_Strict):
    n: Literal[2, 3] = 2
    s: float = 0.25
    s_list: list[float] | None = None
    eps: list[float] = Field(default_factory=list)

    @field_validator("s")
    @classmethod
    def _s_range(cls, v):
        lo, hi = S_STRICT_RANGE
        if not 0 < v < 0.5:
            raise ValueError(f"s={v} violates 0 < s < 1/2")
        if not lo <= v <= hi:
            raise ValueError(f"s={v} outside the calibrated range [{lo}, {hi}]")
        return v

    @field_validator("s_list")
    @classmethod
    def _s_list(cls, v):
        if v is None:
            return v
        for x in v:
            cls._s_range(x)
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("s_list must be strictly increasing")
        return v

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("every eps must be > 0")
        return v


class QuadratureBlock(_Strict):
    N: int = Field(default=256, ge=16)
    pole_rule: Literal["gauss_jacobi", "graded"] = "gauss_jacobi"
    pole_cap_radius: float = Field(default=pi / 8, gt=0, le=pi / 4)


class SweepBlock(_Strict):
    parameter: Literal["t", "s", "eps", "N"]
    values: list[float] = Field(min_length=1)


class MovingPlanesBlock(_Strict):
    directions: int = Field(default=16, ge=1)
    samples: int | None = Field(default=None, ge=1000)
    tol: float | None = Field(default=None, gt=0)


class RadialBlock(_Strict):
    """Perturbation ``f`` in the same triple format as star-shape terms."""

    terms: list[list[float]] = Field(default_factory=lambda: [[2, 0.05, 0.0]])
    constant: float = 0.0
    point: list[float] | None = None


class OutputBlock(_Strict):
    dir: str = "nlmc_out"
    report: str = "report.json"
    csv: str = "results.csv"
    plots: bool = True


class RunConfig(_Strict):
    version: Literal[1] = SCHEMA_VERSION
    experiment: Literal[EXPERIMENTS]
    shape: ShapeBlock | None = None
    params: ParamsBlock = ParamsBlock()
    quadrature: QuadratureBlock = QuadratureBlock()
    point: list[float] | None = None
    sweep: SweepBlock | None = None
    moving_planes: MovingPlanesBlock = MovingPlanesBlock()
    radial: RadialBlock = RadialBlock()
    output: OutputBlock = OutputBlock()
    seed: int = 0
    workers: int | None = Field(default=None, ge=1)
    warning_threshold: float = Field(default=1e-6, gt=0)

    @model_validator(mode="after")
    def _consistency(self):
        if self.experiment == "sweep" and self.sweep is None:
            raise ValueError("experiment 'sweep' needs a sweep block")
        if self.experiment != "radial-graph" and self.shape is None:
            if not (self.experiment == "sweep" and self.sweep.parameter == "t"):
                raise ValueError(f"experiment '{self.experiment}' needs a shape block")
        if self.shape is not None:
            n = self.params.n
            dims = [len(self.shape.center)] if self.shape.center is not None else []
            dims += [len(self.shape.semi_axes)] if self.shape.semi_axes is not None else []
            dims += [len(b.center) for b in self.shape.balls or ()]
            if any(d != n for d in dims):
                raise ValueError(f"shape coordinates must have length n={n}")
        if self.point is not None and len(self.point) != self.params.n:
            raise ValueError(f"point must have length n={self.params.n}")
        return self


def _format_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def validate(data: dict) -> RunConfig:
    """Validate a plain mapping; schema violations become :class:`ConfigError`."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        nxt = cur.get(k)
        if nxt is None:
            nxt = cur[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"override path '{dotted}' crosses a non-mapping at '{k}'")
        cur = nxt
    cur[keys[-1]] = value


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` strings; values are parsed as YAML scalars or lists."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        _set_path(data, key.strip(), yaml.safe_load(raw))
    return data


def load_config(path, overrides=(), experiment=None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = apply_overrides(data, overrides)
    if experiment is not None:
        data["experiment"] = experiment
    return validate(data)


def config_echo(cfg: RunConfig) -> dict:
    """JSON-ready echo that re-validates to an equivalent config.

    The worker count only schedules work, so it lives in the metadata
    side-channel and is left out here.
    """
    return cfg.model_dump(mode="json", exclude={"workers"})
