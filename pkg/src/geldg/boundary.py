"""Inflow boundaries through ghost cells filled from boundary data.

Ghost cells sit outside the inflow end of the grid.  Their moments at ``t^n``
come from a Green-formula identity: the mass of ``u Psi`` in a ghost cell is
the time integral, over the interval during which that cell's characteristics
enter through the boundary, of ``|a| f psi`` at the boundary point, where
``psi`` is ``Psi`` carried back along the characteristic to ``t^n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import TracingError
from .mesh import Grid1D
from .quadrature import basis_table, reference_rule

SUBSTEPS_PER_DT = 10
MAX_TRACE_STEPS = 1000


@dataclass(frozen=True)
class InflowBoundary:
    """Boundary data ``u(x_b, t) = f(t)`` at one end of a non-periodic grid.

    ``extrapolate=True`` freezes the velocity outside the domain at its
    boundary value; otherwise the velocity callback is trusted out there.
    """

    data: Callable[[np.ndarray], np.ndarray]
    side: str = "left"
    extrapolate: bool = False

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"inflow side must be 'left' or 'right', got {self.side!r}")


@dataclass
class GhostRegion:
    count: int
    edges: np.ndarray
    coeffs: np.ndarray
    side: str


def extended_velocity(velocity, grid: Grid1D, boundary: InflowBoundary):
    """Velocity usable in the ghost region (constant extrapolation if requested)."""
    if not boundary.extrapolate:
        return velocity
    if boundary.side == "left":
        return lambda x, t: velocity(np.maximum(x, grid.xa), t)
    return lambda x, t: velocity(np.minimum(x, grid.xb), t)


def trace_characteristic(x0, t0, t1, velocity, dt_ref: float, substeps: int = SUBSTEPS_PER_DT):
    """Integrate ``dx/dt = a(x, t)`` from ``(x0, t0)`` to ``t1`` with classical RK4.

    ``t0`` may be an array (one start time per point); the number of sub-steps
    is ``substeps`` per ``dt_ref`` of the longest trajectory.
    """
    x = np.array(x0, dtype=float)
    t = np.array(np.broadcast_to(t0, x.shape), dtype=float)
    span = t1 - t
    longest = float(np.max(np.abs(span))) if span.size else 0.0
    if longest == 0.0:
        return x
    n_sub = max(1, int(np.ceil(substeps * longest / abs(dt_ref))))
    h = span / n_sub
    for _ in range(n_sub):
        k1 = velocity(x, t)
        k2 = velocity(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = velocity(x + h * k3, t + h)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
    return x


def _hermite_root(x0, v0, x1, v1, h, target):
    """Time offset in [0, h] where the cubic Hermite interpolant reaches ``target``."""
    tau = np.clip((target - x0) / np.where(x1 != x0, x1 - x0, 1.0), 0.0, 1.0)
    for _ in range(8):
        t2, t3 = tau * tau, tau * tau * tau
        p = (2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + tau) * h * v0 + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * h * v1
        dp = (6 * t2 - 6 * tau) * x0 + (3 * t2 - 4 * tau + 1) * h * v0 + (-6 * t2 + 6 * tau) * x1 + (3 * t2 - 2 * tau) * h * v1
        tau = np.clip(tau - (p - target) / np.where(dp != 0, dp, 1.0), 0.0, 1.0)
    return tau * h


def crossing_times(x_starts, t_n: float, x_b: float, velocity, dt_ref: float, safety: float = MAX_TRACE_STEPS):
    """Times at which characteristics leaving ``(x_starts, t^n)`` reach ``x_b``.

    Forward RK4 with ``SUBSTEPS_PER_DT`` sub-steps per ``dt_ref``; the crossing
    inside a sub-step is located on the cubic Hermite interpolant.  Raises
    :class:`TracingError` if some characteristic has not arrived after
    ``safety * |dt_ref|``.
    """
    x = np.array(x_starts, dtype=float)
    out = np.where(x == x_b, float(t_n), np.nan)
    side = np.sign(x_b - x)
    h = abs(dt_ref) / SUBSTEPS_PER_DT
    n_max = int(np.ceil(safety * SUBSTEPS_PER_DT))
    t = float(t_n)
    v = velocity(x, t)
    for _ in range(n_max):
        if not np.any(np.isnan(out)):
            return out
        k2 = velocity(x + 0.5 * h * v, t + 0.5 * h)
        k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = velocity(x + h * k3, t + h)
        x_new = x + h / 6.0 * (v + 2 * k2 + 2 * k3 + k4)
        v_new = velocity(x_new, t + h)
        hit = np.isnan(out) & (np.sign(x_b - x_new) != side)
        if np.any(hit):
            tau = _hermite_root(x[hit], v[hit], x_new[hit], v_new[hit], h, x_b)
            out[hit] = t + tau
        x, v, t = x_new, v_new, t + h
    if np.any(np.isnan(out)):
        bad = np.asarray(x_starts, dtype=float)[np.isnan(out)]
        raise TracingError(
            f"characteristic from x={bad[0]} did not reach the boundary {x_b} "
            f"within {safety:g} time steps"
        )
    return out


def crossing_time(x_start: float, t_n: float, x_b: float, velocity, dt_ref: float) -> float:
    """Time at which the characteristic through ``(x_start, t_n)`` reaches ``x_b``."""
    return float(crossing_times(np.array([x_start]), t_n, x_b, velocity, dt_ref)[0])


BUFFER_FRACTION = 0.25


def ghost_offsets(max_edge_speed: float, dt: float, dx: float, stages: int) -> np.ndarray:
    """Distances of the ghost edges from the boundary, nearest first.

    Full-width cells cover every upstream cell of the interior.  Beyond them
    sit ``stages`` narrow buffer cells: the extrapolated outer flux pollutes
    one cell per stage, and narrow buffers keep the traced region short.
    """
    n_full = int(np.ceil(abs(max_edge_speed * dt) / dx)) + 1
    widths = np.concatenate([np.full(n_full, dx), np.full(stages, BUFFER_FRACTION * dx)])
    return np.concatenate([[0.0], np.cumsum(widths)])


def fill_ghost(
    edges: np.ndarray,
    k: int,
    boundary: InflowBoundary,
    velocity,
    x_b: float,
    t_n: float,
    dt_ref: float,
) -> np.ndarray:
    """Modal coefficients (G, k+1) on ghost cells with the given edges.

    ``edges`` must be ordered away from the boundary: ``edges[0] == x_b``.
    """
    edges = np.asarray(edges, dtype=float)
    t_star = crossing_times(edges, t_n, x_b, velocity, dt_ref)
    z, w = reference_rule(k + 2)
    t_lo, t_hi = t_star[:-1], t_star[1:]
    tq = 0.5 * (t_lo + t_hi)[:, None] + (t_hi - t_lo)[:, None] * z
    foot = trace_characteristic(np.full(tq.shape, x_b), tq, t_n, velocity, dt_ref)
    a_b = np.abs(velocity(np.full(tq.shape, x_b), tq))
    f = np.asarray(boundary.data(tq), dtype=float)
    lo = np.minimum(edges[:-1], edges[1:])
    width = np.abs(np.diff(edges))
    r = (foot - (lo + 0.5 * width)[:, None]) / width[:, None]
    moments = np.einsum("gq,q,gqm->gm", a_b * f, w, basis_table(k, r)) * (t_hi - t_lo)[:, None]
    return moments / width[:, None]


def extend_grid(
    coeffs: np.ndarray,
    grid: Grid1D,
    k: int,
    boundary: InflowBoundary,
    velocity,
    t_n: float,
    dt: float,
    offsets: np.ndarray,
) -> tuple[np.ndarray, Grid1D, GhostRegion]:
    """Append ghost cells at ``offsets`` beyond the inflow end; returns coefficients and grid."""
    n_ghost = len(offsets) - 1
    if boundary.side == "left":
        x_b = grid.xa
        g_edges = x_b - offsets
        g_coeffs = fill_ghost(g_edges, k, boundary, velocity, x_b, t_n, dt)
        # ghost cells ordered outward; flip to grid order
        ext_edges = np.concatenate([g_edges[::-1], grid.x_edges[1:]])
        ext_coeffs = np.concatenate([np.broadcast_to(g_coeffs[::-1], coeffs.shape[:-2] + g_coeffs.shape), coeffs], axis=-2)
    else:
        x_b = grid.xb
        g_edges = x_b + offsets
        g_coeffs = fill_ghost(g_edges, k, boundary, velocity, x_b, t_n, dt)
        ext_edges = np.concatenate([grid.x_edges[:-1], g_edges])
        ext_coeffs = np.concatenate([coeffs, np.broadcast_to(g_coeffs, coeffs.shape[:-2] + g_coeffs.shape)], axis=-2)
    region = GhostRegion(n_ghost, g_edges, g_coeffs, boundary.side)
    return ext_coeffs, Grid1D(ext_edges, "inflow"), region


def interior_slice(grid: Grid1D, region: GhostRegion) -> slice:
    if region.side == "left":
        return slice(region.count, region.count + grid.n)
    return slice(0, grid.n)

