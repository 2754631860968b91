"""Background grid and the per-step space-time partition.

Edge and cell speeds are sampled once per step at ``t^{n+1}``. Dynamic edges
are straight lines ``x_e + (t - t^{n+1}) nu_e``; all slab arrays may carry
leading batch dimensions (one per independent 1D line).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import MeshTanglingError

SpeedFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class Grid1D:
    x_edges: np.ndarray
    bc: str = "periodic"

    def __post_init__(self):
        edges = np.asarray(self.x_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("x_edges must be a 1D sequence with at least two points")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("x_edges must be strictly increasing")
        if self.bc not in ("periodic", "inflow"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        edges.setflags(write=False)
        object.__setattr__(self, "x_edges", edges)

    @classmethod
    def uniform(cls, xa: float, xb: float, n: int, bc: str = "periodic") -> "Grid1D":
        return cls(np.linspace(xa, xb, n + 1), bc)

    @property
    def n(self) -> int:
        return self.x_edges.size - 1

    @cached_property
    def dx(self) -> np.ndarray:
        out = np.diff(self.x_edges)
        out.setflags(write=False)
        return out

    @cached_property
    def centers(self) -> np.ndarray:
        out = 0.5 * (self.x_edges[1:] + self.x_edges[:-1])
        out.setflags(write=False)
        return out

    @property
    def xa(self) -> float:
        return float(self.x_edges[0])

    @property
    def xb(self) -> float:
        return float(self.x_edges[-1])

    @property
    def length(self) -> float:
        return self.xb - self.xa

    @property
    def periodic(self) -> bool:
        return self.bc == "periodic"


@dataclass(frozen=True)
class SpeedRule:
    """Edge speeds ``nu`` and adjoint cell speeds ``alpha`` as functions of (x, t)."""

    edge_speed: SpeedFn
    cell_speed: SpeedFn
    name: str = "custom"


def velocity_rule(velocity: SpeedFn) -> SpeedRule:
    """Default partition: ``nu_e = a(x_e, t^{n+1})`` and ``alpha_j = a(x_j, t^{n+1})``."""
    return SpeedRule(velocity, velocity, "geldg")


@dataclass(frozen=True)
class SpaceTimeSlab:
    grid: Grid1D
    t_n: float
    t_np1: float
    nu: np.ndarray
    alpha: np.ndarray
    x_star: np.ndarray = field(init=False)
    ext: tuple[np.ndarray, np.ndarray] = field(init=False)

    def __post_init__(self):
        dt = self.t_np1 - self.t_n
        edges = self.grid.x_edges
        x_star = edges - self.nu * dt
        object.__setattr__(self, "x_star", x_star)
        left = np.minimum(edges[:-1], x_star[..., :-1] + self.alpha * dt)
        right = np.maximum(edges[1:], x_star[..., 1:] + self.alpha * dt)
        object.__setattr__(self, "ext", (left, right))

    @property
    def dt(self) -> float:
        return self.t_np1 - self.t_n

    @property
    def upstream_widths(self) -> np.ndarray:
        return np.diff(self.x_star, axis=-1)

    def _check_time(self, t: float) -> None:
        lo, hi = sorted((self.t_n, self.t_np1))
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if not lo - tol <= t <= hi + tol:
            raise ValueError(f"t={t} outside slab [{self.t_n}, {self.t_np1}]")

    def edges_at(self, t: float) -> np.ndarray:
        """All dynamic edge positions at time ``t``."""
        self._check_time(t)
        return self.grid.x_edges + (t - self.t_np1) * self.nu

    def widths_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        return self.grid.dx + (self.nu[..., :-1] - self.nu[..., 1:]) * (self.t_np1 - t)


def build_slab(grid: Grid1D, rule: SpeedRule, t_n: float, dt: float, batch_shape: tuple = ()) -> SpaceTimeSlab:
    """Partition one step.

    ``dt`` may be negative (backward sub-steps of composition splittings); the
    upstream cells then lie downstream.  Speed callbacks receive points already
    broadcast to ``batch_shape`` so per-line closures can match them to their
    line coordinate.  Raises :class:`MeshTanglingError` if a dynamic cell
    degenerates anywhere in the slab.
    """
    if dt == 0 or not np.isfinite(dt):
        raise ValueError(f"time step must be finite and nonzero, got {dt}")
    t_np1 = t_n + dt
    xe = np.broadcast_to(grid.x_edges, tuple(batch_shape) + (grid.n + 1,))
    xc = np.broadcast_to(grid.centers, tuple(batch_shape) + (grid.n,))
    nu = np.asarray(rule.edge_speed(xe, t_np1), dtype=float)
    alpha = np.asarray(rule.cell_speed(xc, t_np1), dtype=float)
    try:
        nu = np.broadcast_to(nu, np.broadcast_shapes(nu.shape, (grid.n + 1,)))
        alpha = np.broadcast_to(alpha, np.broadcast_shapes(alpha.shape, (grid.n,)))
        batch = np.broadcast_shapes(nu.shape[:-1], alpha.shape[:-1])
    except ValueError as exc:
        raise ValueError("speed rule returned arrays of the wrong shape") from exc
    nu = np.array(np.broadcast_to(nu, batch + (grid.n + 1,)))
    alpha = np.array(np.broadcast_to(alpha, batch + (grid.n,)))
    if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(alpha))):
        raise ValueError("speed rule returned non-finite values")
    if grid.periodic:
        nu[..., -1] = nu[..., 0]
    slab = SpaceTimeSlab(grid, float(t_n), float(t_np1), nu, alpha)
    # width is linear in t, so checking both ends covers the slab
    w_star = slab.upstream_widths
    bad = np.argwhere(w_star <= 0)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise MeshTanglingError(idx if len(idx) > 1 else idx[0], float(w_star[tuple(bad[0])]))
    return slab


def dynamic_edge(slab: SpaceTimeSlab, edge_index: int, t: float):
    """Position of dynamic edge ``edge_index`` at time ``t``."""
    slab._check_time(t)
    return slab.grid.x_edges[edge_index] + (t - slab.t_np1) * slab.nu[..., edge_index]


def cell_width(slab: SpaceTimeSlab, j: int, t: float):
    """Width of dynamic cell ``j`` at time ``t``."""
    w = slab.widths_at(t)[..., j]
    if np.any(w <= 0):
        raise MeshTanglingError(j, float(np.min(w)))
    return w
