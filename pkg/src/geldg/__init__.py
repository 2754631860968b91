"""Generalized Eulerian-Lagrangian discontinuous Galerkin transport solvers."""

from .errors import (
    BoundViolationError,
    ConditioningError,
    GELDGError,
    LimiterPreconditionError,
    MeshTanglingError,
    OutOfDomainError,
    TracingError,
)
from .field import DGField, error_norms, project, total_mass
from .limiters import Bounds
from .mesh import Grid1D, SpeedRule, build_slab, velocity_rule
from .problems import PROBLEM_NAMES, ProblemSpec, builtin
from .scheme import TABLEAUS, SchemeConfig, advance, step
from .solver2d import Scheme2DConfig, TensorField2D, advance2d, project2d

__all__ = [
    "Bounds",
    "BoundViolationError",
    "ConditioningError",
    "DGField",
    "GELDGError",
    "Grid1D",
    "LimiterPreconditionError",
    "MeshTanglingError",
    "OutOfDomainError",
    "PROBLEM_NAMES",
    "ProblemSpec",
    "Scheme2DConfig",
    "SchemeConfig",
    "SpeedRule",
    "TABLEAUS",
    "TensorField2D",
    "TracingError",
    "advance",
    "advance2d",
    "build_slab",
    "builtin",
    "error_norms",
    "project",
    "project2d",
    "step",
    "total_mass",
    "velocity_rule",
]
