"""Two-dimensional transport by dimensional splitting.

The solution is stored at the (k+1)^2 tensor Gauss nodes of each cell.  An
x-sweep treats every horizontal node line ``y = y_{j,q}`` as an independent
1D problem with velocity ``a(x, y_{j,q}, t)``: the k+1 nodal values per cell
become a P^k polynomial, the 1D GEL DG step advances all lines at once, and the
result is sampled back at the nodes.  y-sweeps mirror this with ``b``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .limiters import Bounds
from .mesh import Grid1D
from .quadrature import modal_to_nodal, nodal_to_modal, reference_rule
from .scheme import SchemeConfig, step_coeffs, time_steps

# triple-jump weights lifting a symmetric second-order step to fourth order
W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
W0 = 1.0 - 2.0 * W1


@dataclass
class TensorField2D:
    """Nodal values ``values[i, j, p, q] = u(x_{i,p}, y_{j,q})``."""

    gx: Grid1D
    gy: Grid1D
    k: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        want = (self.gx.n, self.gy.n, self.k + 1, self.k + 1)
        if self.values.shape != want:
            raise ValueError(f"nodal array shape {self.values.shape} != {want}")

    def copy(self) -> "TensorField2D":
        return TensorField2D(self.gx, self.gy, self.k, self.values.copy())

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates (Nx, K) and (Ny, K)."""
        z, _ = reference_rule(self.k + 1)
        x = self.gx.centers[:, None] + self.gx.dx[:, None] * z
        y = self.gy.centers[:, None] + self.gy.dx[:, None] * z
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcast coordinates shaped like ``values``."""
        x, y = self.nodes()
        return x[:, None, :, None], y[None, :, None, :]

    def mass(self) -> float:
        _, w = reference_rule(self.k + 1)
        cell = np.einsum("ijpq,p,q->ij", self.values, w, w)
        return float(np.sum(cell * self.gx.dx[:, None] * self.gy.dx[None, :]))

    def to_csv(self, path) -> None:
        x, y = self.nodes()
        K = self.k + 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "p", "q", "x", "y", "value"])
            for i in range(self.gx.n):
                for j in range(self.gy.n):
                    for p in range(K):
                        for q in range(K):
                            w.writerow([i, j, p, q, repr(float(x[i, p])), repr(float(y[j, q])), repr(float(self.values[i, j, p, q]))])


def project2d(f: Callable, gx: Grid1D, gy: Grid1D, k: int) -> TensorField2D:
    """Nodal interpolation at the tensor Gauss nodes (the Q^k data of the scheme)."""
    z, _ = reference_rule(k + 1)
    x = gx.centers[:, None] + gx.dx[:, None] * z
    y = gy.centers[:, None] + gy.dx[:, None] * z
    vals = f(x[:, None, :, None], y[None, :, None, :])
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (gx.n, gy.n, k + 1, k + 1))
    return TensorField2D(gx, gy, k, np.array(vals))


@dataclass
class Scheme2DConfig:
    a: Callable  # a(x, y, t)
    b: Callable  # b(x, y, t)
    k: int = 1
    rk: int = 2
    limiter: str = "none"
    bounds: Optional[Bounds] = None
    tvb_M: float = 15.0
    max_speed: Optional[tuple[float, float]] = None
    # per-edge viscosity: the swirl reverses sign mid-step, which makes the
    # line-global max|a - nu| large enough to destabilize explicit stages
    lf_mode: str = "local"

    def line_config(self, velocity) -> SchemeConfig:
        return SchemeConfig(
            velocity, k=self.k, rk=self.rk, lf_mode=self.lf_mode, limiter=self.limiter,
            bounds=self.bounds, tvb_M=self.tvb_M,
        )


def _line_velocity(fn, coord: np.ndarray, along_x: bool):
    """1D velocity for a batch of lines; ``coord`` is the fixed coordinate per line."""

    def vel(x, t):
        c = coord.reshape(coord.shape + (1,) * (np.ndim(x) - coord.ndim))
        return fn(x, c, t) if along_x else fn(c, x, t)

    return vel


def sweep_x(field: TensorField2D, dt: float, t: float, config: Scheme2DConfig) -> TensorField2D:
    """Advance every horizontal node line by ``dt`` with ``u_t + (a u)_x = 0``."""
    k = field.k
    _, y = field.nodes()
    # lines indexed (j, q); cells i; modal index m
    coeffs = np.einsum("mp,ijpq->jqim", nodal_to_modal(k), field.values)
    cfg = config.line_config(_line_velocity(config.a, y, along_x=True))
    out, _ = step_coeffs(coeffs, field.gx, cfg, dt, t)
    vals = np.einsum("pm,jqim->ijpq", modal_to_nodal(k), out)
    return TensorField2D(field.gx, field.gy, k, vals)


def sweep_y(field: TensorField2D, dt: float, t: float, config: Scheme2DConfig) -> TensorField2D:
    """Advance every vertical node line by ``dt`` with ``u_t + (b u)_y = 0``."""
    k = field.k
    x, _ = field.nodes()
    coeffs = np.einsum("mq,ijpq->ipjm", nodal_to_modal(k), field.values)
    cfg = config.line_config(_line_velocity(config.b, x, along_x=False))
    out, _ = step_coeffs(coeffs, field.gy, cfg, dt, t)
    vals = np.einsum("qm,ipjm->ijpq", modal_to_nodal(k), out)
    return TensorField2D(field.gx, field.gy, k, vals)


def strang_step(field: TensorField2D, dt: float, t: float, config: Scheme2DConfig) -> TensorField2D:
    """x half-step, y full step, x half-step."""
    half = 0.5 * dt
    f = sweep_x(field, half, t, config)
    f = sweep_y(f, dt, t, config)
    return sweep_x(f, half, t + half, config)


def composed_step(field: TensorField2D, dt: float, t: float, config: Scheme2DConfig, order: int = 2) -> TensorField2D:
    if order == 2:
        return strang_step(field, dt, t, config)
    if order == 4:
        f = strang_step(field, W1 * dt, t, config)
        f = strang_step(f, W0 * dt, t + W1 * dt, config)
        return strang_step(f, W1 * dt, t + (W1 + W0) * dt, config)
    raise ValueError(f"splitting order must be 2 or 4, got {order}")


def time_step_2d(gx: Grid1D, gy: Grid1D, cfl: float, a_max: float, b_max: float) -> float:
    rate = a_max / float(np.min(gx.dx)) + b_max / float(np.min(gy.dx))
    if rate <= 0:
        raise ValueError("both velocity bounds vanish; the time step is undefined")
    return cfl / rate


def _speed_bounds(field: TensorField2D, config: Scheme2DConfig, t: float) -> tuple[float, float]:
    if config.max_speed is not None:
        return config.max_speed
    X, Y = field.mesh()
    return float(np.max(np.abs(config.a(X, Y, t)))), float(np.max(np.abs(config.b(X, Y, t))))


def advance2d(
    field: TensorField2D,
    config: Scheme2DConfig,
    T: float,
    cfl: float,
    order: int = 2,
    t0: float = 0.0,
    callback: Optional[Callable] = None,
) -> TensorField2D:
    """March to ``t0 + T``; the final step is clipped to land on ``T``."""
    a_max, b_max = _speed_bounds(field, config, t0)
    dt = time_step_2d(field.gx, field.gy, cfl, a_max, b_max)
    t = t0
    for h in time_steps(T, dt):
        field = composed_step(field, h, t, config, order)
        t += h
        if callback is not None:
            callback(t, field)
    return field


def error_norms_2d(field: TensorField2D, exact: Callable) -> tuple[float, float, float]:
    """Area-averaged L1, root-mean-square L2 and max errors at the Gauss nodes."""
    _, w = reference_rule(field.k + 1)
    X, Y = field.mesh()
    err = field.values - exact(X, Y)
    area = field.gx.length * field.gy.length
    ww = (field.gx.dx[:, None, None, None] * w[None, None, :, None]) * (field.gy.dx[None, :, None, None] * w[None, None, None, :])
    l1 = float(np.sum(ww * np.abs(err)) / area)
    l2 = float(np.sqrt(np.sum(ww * err**2) / area))
    return l1, l2, float(np.max(np.abs(err)))
