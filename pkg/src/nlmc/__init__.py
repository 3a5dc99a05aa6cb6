"""Nonlocal mean curvature of smooth domains in the plane and in space.

Submodules
----------
kernel         fractional and mollified kernels
geometry       shape oracles, boundary quadrature, global measures
curvature      boundary and mollified evaluators, fields, gradients
stability      Lipschitz deficit, ball fitting, stability reports
moving_planes  critical hyperplanes and symmetric differences
radial_graph   near-sphere expansion and its kernel
harness        run configuration, orchestration and CLI
"""
from nlmc._backend import BACKEND
from nlmc.curvature import CurvatureField, hs_boundary, hs_field, hs_volume_mollified, local_limit, sphere_value
from nlmc.errors import ConfigError, DomainError, GeometryError, InvalidShapeError, NLMCError, NumericalError
from nlmc.geometry import Ball, BallUnion, Ellipsoid, StarShape, measures
from nlmc.kernel import FracParams
from nlmc.quadrature import QuadratureSpec

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Ball",
    "BallUnion",
    "ConfigError",
    "CurvatureField",
    "DomainError",
    "Ellipsoid",
    "FracParams",
    "GeometryError",
    "InvalidShapeError",
    "NLMCError",
    "NumericalError",
    "QuadratureSpec",
    "StarShape",
    "hs_boundary",
    "hs_field",
    "hs_volume_mollified",
    "local_limit",
    "measures",
    "sphere_value",
]
