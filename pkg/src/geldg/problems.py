"""Built-in test problems: velocities, initial data, exact solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .limiters import Bounds

TWO_PI = 2.0 * np.pi
SWIRL_PERIOD = 1.5
SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    domain: tuple
    bc: str
    u0: Callable
    velocity: Optional[Callable] = None  # a(x, t) in 1D
    a: Optional[Callable] = None  # a(x, y, t) in 2D
    b: Optional[Callable] = None  # b(x, y, t) in 2D
    exact: Optional[Callable] = None
    bounds: Optional[Bounds] = None
    max_speed: Optional[object] = None  # float in 1D, (a_max, b_max) in 2D
    inflow_data: Optional[Callable] = None
    inflow_side: str = "left"
    T: float = 1.0


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _const_velocity(x, t):
    return np.ones_like(np.asarray(x, dtype=float))


def _sin_velocity(x, t):
    return np.sin(x)


def varcoef_exact(x, t):
    """Solution of ``u_t + (sin(x) u)_x = 0`` with ``u(x, 0) = 1``.

    Algebraically equal to ``sin(2 atan(e^-t tan(x/2))) / sin(x)`` but free of
    the 0/0 at multiples of pi.
    """
    x = np.asarray(x, dtype=float)
    e = np.exp(-t)
    c = np.cos(x)
    return 2.0 * e / ((1.0 + c) + e * e * (1.0 - c))


def varcoef_exact_quotient(x, t):
    """The quotient form, switching to the limit where ``|sin x| < 1e-8``."""
    x = np.asarray(x, dtype=float)
    s = np.sin(x)
    near = np.abs(s) < SINGULAR_TOL
    safe = np.where(near, 1.0, s)
    val = np.sin(2.0 * np.arctan(np.exp(-t) * np.tan(0.5 * x))) / safe
    out = np.where(near, removable_singularity_eval(x, t), val)
    return float(out) if out.ndim == 0 else out


def removable_singularity_eval(x, t):
    """Limit of the quotient form as ``sin x -> 0``: ``e^-t / (cos^2(x/2) + e^-2t sin^2(x/2))``.

    Gives ``e^-t`` at even multiples of pi and ``e^t`` at odd ones.
    """
    x = np.asarray(x, dtype=float)
    e = np.exp(-t)
    out = e / (np.cos(0.5 * x) ** 2 + e * e * np.sin(0.5 * x) ** 2)
    return float(out) if out.ndim == 0 else out


def varcoef_inflow_data(t):
    """Boundary value at ``x = pi/2``: ``sin(2 atan(e^-t))``."""
    e = np.exp(-np.asarray(t, dtype=float))
    return 2.0 * e / (1.0 + e * e)


def step_initial(x):
    x = np.asarray(x, dtype=float)
    return np.where((x > 2.0) & (x < 7.0), 1.0, 0.0)


def swirl_g(t):
    return np.cos(np.pi * t / SWIRL_PERIOD) * np.pi


def swirl_a(x, y, t):
    return -np.cos(0.5 * x) ** 2 * np.sin(y) * swirl_g(t)


def swirl_b(x, y, t):
    return np.sin(x) * np.cos(0.5 * y) ** 2 * swirl_g(t)


BELL_R0 = 0.3 * np.pi
BELL_CENTER = (0.3 * np.pi, 0.0)


def cosine_bell(x, y):
    r = np.hypot(x - BELL_CENTER[0], y - BELL_CENTER[1])
    return np.where(r < BELL_R0, BELL_R0 * np.cos(r * np.pi / (2.0 * BELL_R0)) ** 6, 0.0)


# Slotted disk, cone and hump in the classical unit-square layout (centres at
# (0.5, 0.75), (0.5, 0.25), (0.25, 0.5), radius 0.15), mapped onto [-pi, pi]^2.
# The figure-only initial profile is not tabulated, so these constants are a
# reconstruction: radius 0.15 * 2pi = 0.3pi, slot width 0.05 * 2pi.
SHAPE_RADIUS = 0.3 * np.pi
SLOT_WIDTH = 0.05 * TWO_PI


def _unit_to_box(p):
    return -np.pi + TWO_PI * p


def swirl_shapes_initial(x, y):
    r0 = SHAPE_RADIUS
    dx, dy = x - _unit_to_box(0.5), y - _unit_to_box(0.75)
    disk = (np.hypot(dx, dy) <= r0) & ((np.abs(dx) >= 0.5 * SLOT_WIDTH) | (y >= _unit_to_box(0.85)))
    rc = np.hypot(x - _unit_to_box(0.5), y - _unit_to_box(0.25)) / r0
    cone = np.where(rc <= 1.0, 1.0 - rc, 0.0)
    rh = np.hypot(x - _unit_to_box(0.25), y - _unit_to_box(0.5)) / r0
    hump = np.where(rh <= 1.0, 0.25 * (1.0 + np.cos(np.pi * np.minimum(rh, 1.0))), 0.0)
    return np.where(disk, 1.0, 0.0) + cone + hump


def _returning(u0):
    """Exact solution of the reversing swirl, known only at whole periods."""

    def exact(x, y, t):
        periods = t / SWIRL_PERIOD
        if abs(periods - round(periods)) > 1e-12:
            raise ValueError(f"swirl exact solution is only known at multiples of T={SWIRL_PERIOD}")
        return u0(x, y)

    return exact


def _const_sin() -> ProblemSpec:
    return ProblemSpec(
        "const_sin", 1, (0.0, TWO_PI), "periodic", np.sin, velocity=_const_velocity,
        exact=lambda x, t: np.sin(x - t), bounds=Bounds(-1.0, 1.0), max_speed=1.0, T=np.pi,
    )


def _varcoef_sin() -> ProblemSpec:
    return ProblemSpec(
        "varcoef_sin", 1, (0.0, TWO_PI), "periodic", _ones, velocity=_sin_velocity,
        exact=varcoef_exact, bounds=Bounds.positivity(), max_speed=1.0, T=1.0,
    )


def _varcoef_inflow() -> ProblemSpec:
    return ProblemSpec(
        "varcoef_inflow", 1, (0.5 * np.pi, 2.5 * np.pi), "inflow", _ones, velocity=_sin_velocity,
        exact=varcoef_exact, bounds=Bounds.positivity(), max_speed=1.0,
        inflow_data=varcoef_inflow_data, inflow_side="left", T=1.0,
    )


def _step() -> ProblemSpec:
    return ProblemSpec(
        "step", 1, (0.0, 90.0), "periodic", step_initial, velocity=_const_velocity,
        exact=lambda x, t: step_initial(np.mod(x - t, 90.0)), bounds=Bounds(0.0, 1.0), max_speed=1.0, T=40.0,
    )


def _swirl() -> ProblemSpec:
    return ProblemSpec(
        "swirl", 2, ((-np.pi, np.pi), (-np.pi, np.pi)), "periodic", cosine_bell, a=swirl_a, b=swirl_b,
        exact=_returning(cosine_bell),
        bounds=Bounds.positivity(), max_speed=(np.pi, np.pi), T=SWIRL_PERIOD,
    )


def _swirl_shapes() -> ProblemSpec:
    return ProblemSpec(
        "swirl_shapes", 2, ((-np.pi, np.pi), (-np.pi, np.pi)), "periodic", swirl_shapes_initial,
        a=swirl_a, b=swirl_b,
        exact=_returning(swirl_shapes_initial),
        bounds=Bounds(0.0, 1.0), max_speed=(np.pi, np.pi), T=SWIRL_PERIOD,
    )


_REGISTRY = {
    "const_sin": _const_sin,
    "varcoef_sin": _varcoef_sin,
    "varcoef_inflow": _varcoef_inflow,
    "step": _step,
    "swirl": _swirl,
    "swirl_shapes": _swirl_shapes,
}

PROBLEM_NAMES = tuple(_REGISTRY)


def builtin(name: str) -> ProblemSpec:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(PROBLEM_NAMES)}") from None
