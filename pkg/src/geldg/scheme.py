"""One-dimensional generalized Eulerian-Lagrangian DG stepping.

Per step the background grid is paired with a space-time slab whose edges are
straight lines ending on the grid at ``t^{n+1}``.  The solution on the moving
cells is advanced with an SSP Runge-Kutta method written for the mass-weighted
moments ``A(t) U``; the final stage lands on the background grid where
``A = dx I``.  Coefficient arrays are (..., N, k+1): leading dimensions are
independent lines stepped together (used by the 2D splitting).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .boundary import InflowBoundary, extend_grid, extended_velocity, ghost_offsets, interior_slice
from .errors import ConditioningError, MeshTanglingError
from .field import DGField, upstream_moments
from .limiters import (
    Bounds,
    ThetaRecord,
    first_order_edge_fluxes,
    mpp_flux_limit,
    rescale_coeffs,
    tvb_coeffs,
)
from .mesh import Grid1D, SpaceTimeSlab, SpeedRule, build_slab, velocity_rule
from .quadrature import basis_deriv_table, basis_table, end_values, gauss_basis, reference_rule

COND_LIMIT = 1e12
LIMITERS = ("none", "gel_mpp", "zhang", "pp", "tvb")


@dataclass(frozen=True)
class RKTableau:
    """Shu-Osher form: ``U_i = sum_l alpha[i-1][l] U_l + beta[i-1][l] dt L(U_l)``.

    ``d[l]`` is the stage time fraction of ``U_l`` for ``l < s``; the last stage
    sits at ``t^{n+1}``.
    """

    name: str
    alpha: tuple
    beta: tuple
    d: tuple

    def __post_init__(self):
        s = len(self.alpha)
        if len(self.beta) != s or len(self.d) != s:
            raise ValueError("tableau rows and stage times disagree")
        for i, (ra, rb) in enumerate(zip(self.alpha, self.beta)):
            if len(ra) != i + 1 or len(rb) != i + 1:
                raise ValueError(f"row {i} of the tableau has the wrong length")
            if abs(sum(ra) - 1.0) > 1e-14:
                raise ValueError(f"alpha row {i} does not sum to one")
        if self.d[0] != 0:
            raise ValueError("first stage must start at t^n")

    @property
    def stages(self) -> int:
        return len(self.alpha)

    def stage_time(self, i: int) -> float:
        return 1.0 if i == self.stages else float(self.d[i])

    def flux_weights(self) -> np.ndarray:
        """Weights ``b_l`` with ``U_s = U_0 + dt sum_l b_l L(U_l)``."""
        return _flux_weights(self).copy()


@lru_cache(maxsize=None)
def _flux_weights(tab: RKTableau) -> np.ndarray:
    # expand each stage as U_0 + dt * sum_l gamma_l L(U_l)
    s = tab.stages
    gam = [np.zeros(s)]
    for i in range(1, s + 1):
        g = np.zeros(s)
        for l in range(i):
            g += tab.alpha[i - 1][l] * gam[l]
            g[l] += tab.beta[i - 1][l]
        gam.append(g)
    return gam[-1]


TABLEAUS = {
    1: RKTableau("FE", ((1.0,),), ((1.0,),), (0.0,)),
    2: RKTableau("SSPRK2", ((1.0,), (0.5, 0.5)), ((1.0,), (0.0, 0.5)), (0.0, 1.0)),
    3: RKTableau(
        "SSPRK3",
        ((1.0,), (0.75, 0.25), (1 / 3, 0.0, 2 / 3)),
        ((1.0,), (0.0, 0.25), (0.0, 0.0, 2 / 3)),
        (0.0, 1.0, 0.5),
    ),
    4: RKTableau(
        "RK4",
        ((1.0,), (1.0, 0.0), (1.0, 0.0, 0.0), (-1 / 3, 1 / 3, 2 / 3, 1 / 3)),
        ((0.5,), (0.0, 0.5), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1 / 6)),
        (0.0, 0.5, 0.5, 1.0),
    ),
}


@dataclass
class SchemeConfig:
    velocity: Callable
    k: int = 1
    rk: int = 2
    rule: Optional[SpeedRule] = None
    lf_mode: str = "global"
    limiter: str = "none"
    bounds: Optional[Bounds] = None
    tvb_M: float = 15.0
    inflow: Optional[InflowBoundary] = None
    max_speed: Optional[float] = None

    def __post_init__(self):
        if self.k not in (0, 1, 2, 3):
            raise ValueError(f"degree k must be 0..3, got {self.k}")
        if self.rk not in TABLEAUS:
            raise ValueError(f"no RK tableau of order {self.rk}")
        if self.lf_mode not in ("global", "local"):
            raise ValueError(f"unknown Lax-Friedrichs mode {self.lf_mode!r}")
        if self.limiter not in LIMITERS:
            raise ValueError(f"unknown limiter {self.limiter!r}; choose from {LIMITERS}")
        if self.limiter in ("gel_mpp", "zhang") and self.bounds is None:
            raise ValueError(f"limiter {self.limiter!r} needs bounds")
        if self.rule is None:
            self.rule = velocity_rule(self.velocity)

    @property
    def tableau(self) -> RKTableau:
        return TABLEAUS[self.rk]

    @property
    def limit_bounds(self) -> Optional[Bounds]:
        if self.limiter == "pp":
            return Bounds.positivity()
        if self.limiter in ("gel_mpp", "zhang"):
            return self.bounds
        return None


@dataclass
class StepInfo:
    t: float
    dt: float
    mass_before: float
    mass_after: float
    mass_expected: float
    flux: np.ndarray
    theta: Optional[ThetaRecord] = None

    @property
    def mass_drift(self) -> float:
        return abs(self.mass_after - self.mass_expected)


class _Geometry:
    """Dynamic cells at one time level, their quadrature points and test tables."""

    def __init__(self, slab: SpaceTimeSlab, t: float, k: int):
        grid = slab.grid
        s = t - slab.t_np1
        edges = grid.x_edges + s * slab.nu
        widths = edges[..., 1:] - edges[..., :-1]
        if np.any(widths <= 0):
            bad = np.argwhere(widths <= 0)[0]
            raise MeshTanglingError(int(bad[-1]), float(widths[tuple(bad)]))
        z, _, _ = gauss_basis(k, k + 2)
        self.t, self.k = t, k
        self.edges, self.widths = edges, widths
        self.xq = edges[..., :-1, None] + widths[..., None] * (z + 0.5)
        self.shift = slab.alpha * s + grid.centers
        self.dx = grid.dx
        self._test = None

    @property
    def r_test(self) -> np.ndarray:
        return (self.xq - self.shift[..., None]) / self.dx[:, None]

    def test_tables(self):
        """Shifted test functions and their r-derivatives at the quadrature points."""
        if self._test is None:
            r = self.r_test
            self._test = (basis_table(self.k, r), basis_deriv_table(self.k, r))
        return self._test


def _geometry(slab: SpaceTimeSlab, t: float, k: int) -> _Geometry:
    return _Geometry(slab, t, k)


def _velocity_at(velocity, x, t):
    return np.broadcast_to(np.asarray(velocity(x, t), dtype=float), x.shape)


def assemble_mass(slab: SpaceTimeSlab, j, t: float, k: int) -> np.ndarray:
    """Mass matrix ``A_j(t)[m, l] = int psi~_l psi_m`` over the dynamic cell ``j``.

    Pass ``j=None`` for all cells at once, shape (..., N, k+1, k+1).
    """
    slab._check_time(t)
    geo = _geometry(slab, t, k)
    A = _mass_from_geometry(geo, k)
    return A if j is None else A[..., j, :, :]


def _mass_from_geometry(geo: _Geometry, k: int) -> np.ndarray:
    _, w, phi = gauss_basis(k, k + 2)
    test = geo.test_tables()[0]
    return geo.widths[..., None, None] * (np.swapaxes(test, -1, -2) @ (w[:, None] * phi))


def _lower_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a batch of lower-triangular matrices by forward substitution."""
    n = A.shape[-1]
    inv = np.zeros_like(A)
    for i in range(n):
        inv[..., i, i] = 1.0 / A[..., i, i]
        for j in range(i):
            acc = A[..., i, j] * inv[..., j, j]
            for l in range(j + 1, i):
                acc = acc + A[..., i, l] * inv[..., l, j]
            inv[..., i, j] = -acc * inv[..., i, i]
    return inv


def _norm1(A: np.ndarray) -> np.ndarray:
    """Batched matrix 1-norm (max column sum); unrolled, as the matrices are tiny."""
    col = np.abs(A[..., 0, :])
    for i in range(1, A.shape[-2]):
        col = col + np.abs(A[..., i, :])
    return col.max(axis=-1)


def _solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched solve of mass-matrix systems with a 1-norm condition check.

    The shifted test polynomial of degree m is orthogonal to the mapped basis
    beyond degree m, so mass matrices are lower triangular in exact arithmetic;
    that structure is used when it holds to rounding.
    """
    n = A.shape[-1]
    upper = max((float(np.abs(A[..., i, i + 1 :]).max()) for i in range(n - 1)), default=0.0)
    if upper <= 1e-12 * float(np.abs(A[..., 0, 0]).max()):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = _lower_inverse(A)
    else:
        inv = np.linalg.inv(A)
    with np.errstate(invalid="ignore", over="ignore"):
        cond = _norm1(A) * _norm1(inv)
    if not np.all(np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise ConditioningError(f"mass matrix condition number {float(np.nanmax(cond)):.3e} exceeds {COND_LIMIT:.0e}")
    return (inv @ rhs[..., None])[..., 0]


def numerical_flux(u_minus, u_plus, a_edge, nu_edge, alpha0):
    """Lax-Friedrichs flux for ``F(u) = (a - nu) u``."""
    s = np.asarray(a_edge) - np.asarray(nu_edge)
    return 0.5 * s * (u_minus + u_plus) + 0.5 * alpha0 * (u_minus - u_plus)


def _edge_traces(U: np.ndarray, k: int, periodic: bool):
    ends = end_values(k)
    u_left = U @ ends[0]
    u_right = U @ ends[1]
    if periodic:
        u_minus = np.concatenate([u_right[..., -1:], u_right], axis=-1)
        u_plus = np.concatenate([u_left, u_left[..., :1]], axis=-1)
    else:
        # outer traces copy the interior one
        u_minus = np.concatenate([u_left[..., :1], u_right], axis=-1)
        u_plus = np.concatenate([u_left, u_right[..., -1:]], axis=-1)
    return u_minus, u_plus


def _rhs_from_geometry(U, slab: SpaceTimeSlab, geo: _Geometry, config: SchemeConfig, velocity):
    k = config.k
    grid = slab.grid
    t = geo.t
    u_minus, u_plus = _edge_traces(U, k, grid.periodic)
    a_edge = _velocity_at(velocity, geo.edges, t)
    speed = a_edge - slab.nu
    if config.lf_mode == "global":
        alpha0 = np.max(np.abs(speed), axis=-1, keepdims=True)
    else:
        alpha0 = np.abs(speed)
    F = numerical_flux(u_minus, u_plus, a_edge, slab.nu, alpha0)
    if grid.periodic:
        F[..., -1] = F[..., 0]

    r_left = (geo.edges[..., :-1] - geo.shift) / grid.dx
    r_right = (geo.edges[..., 1:] - geo.shift) / grid.dx
    L = -F[..., 1:, None] * basis_table(k, r_right) + F[..., :-1, None] * basis_table(k, r_left)

    if k > 0:
        _, w, phi = gauss_basis(k, k + 2)
        uq = U @ phi.T
        aq = _velocity_at(velocity, geo.xq, t)
        g = (aq - slab.alpha[..., None]) * uq * (w * (geo.widths / grid.dx)[..., None])
        L = L + (g[..., None, :] @ geo.test_tables()[1])[..., 0, :]
    return L, F


def rhs(U: np.ndarray, slab: SpaceTimeSlab, t: float, config: SchemeConfig) -> np.ndarray:
    """``d/dt (A U)`` on the dynamic cells at time ``t``."""
    slab._check_time(t)
    geo = _geometry(slab, t, config.k)
    return _rhs_from_geometry(U, slab, geo, config, config.velocity)[0]


def init_upstream(coeffs: np.ndarray, slab: SpaceTimeSlab, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Stage-zero coefficients on the dynamic cells at ``t^n`` and their moments."""
    b = upstream_moments(coeffs, slab.grid, k, slab.x_star, slab.alpha * slab.dt)
    geo = _geometry(slab, slab.t_n, k)
    A0 = _mass_from_geometry(geo, k)
    return _solve(A0, b), b


def _mass_of(coeffs, dx) -> float:
    return float(np.sum(coeffs[..., 0] * dx))


def _step_grid(coeffs, grid: Grid1D, config: SchemeConfig, t: float, dt: float, velocity, rule):
    """One step on a (possibly ghost-extended) grid; returns coeffs, info pieces."""
    k = config.k
    tab = config.tableau
    bounds = config.limit_bounds
    mpp = config.limiter in ("gel_mpp", "zhang", "pp")
    batch = coeffs.shape[:-2]
    if mpp:
        coeffs = rescale_coeffs(coeffs, k, bounds)
    slab = build_slab(grid, rule, t, dt, batch)
    b = upstream_moments(coeffs, grid, k, slab.x_star, slab.alpha * dt)
    geo0 = _geometry(slab, t, k)
    A0 = _mass_from_geometry(geo0, k)
    U0 = _solve(A0, b)
    if config.limiter == "zhang":
        U0 = rescale_coeffs(U0, k, bounds, strict=False)
        b = np.einsum("...ml,...l->...m", A0, U0)

    dx = grid.dx
    stage_U = [U0]
    stage_geo = [geo0]
    moments = [b]
    rhs_cache: dict[int, tuple] = {}

    def stage_rhs(l):
        if l not in rhs_cache:
            rhs_cache[l] = _rhs_from_geometry(stage_U[l], slab, stage_geo[l], config, velocity)
        return rhs_cache[l]

    s = tab.stages
    for i in range(1, s + 1):
        acc = np.zeros_like(b)
        for l in range(i):
            a_il, b_il = tab.alpha[i - 1][l], tab.beta[i - 1][l]
            if a_il != 0.0:
                acc = acc + a_il * moments[l]
            if b_il != 0.0:
                acc = acc + (b_il * dt) * stage_rhs(l)[0]
        if i == s:
            final = acc
            break
        frac = tab.stage_time(i)
        t_i = t + frac * dt
        if frac == 1.0:
            geo = None
            Ui = acc / dx[:, None]
        else:
            geo = _geometry(slab, t_i, k)
            A_i = _mass_from_geometry(geo, k)
            Ui = _solve(A_i, acc)
        if geo is None:
            geo = _geometry(slab, t_i, k)
        if config.limiter == "zhang":
            Ui = rescale_coeffs(Ui, k, bounds, strict=False)
            acc = np.einsum("...ml,...l->...m", _mass_from_geometry(geo, k), Ui)
        stage_U.append(Ui)
        stage_geo.append(geo)
        moments.append(acc)

    weights = tab.flux_weights()
    H = sum(wl * stage_rhs(l)[1] for l, wl in enumerate(weights) if wl != 0.0)
    theta = None
    if mpp:
        widths = slab.upstream_widths
        ubar = b[..., 0] / widths
        a_foot = _velocity_at(velocity, slab.x_star, t)
        h, _ = first_order_edge_fluxes(ubar, a_foot, slab.nu, grid.periodic)
        theta = mpp_flux_limit(H, h, ubar, widths, dx, dt, bounds, grid.periodic)
        H_lim = h + theta.theta * (H - h)
        delta = H_lim - H
        final = final.copy()
        final[..., 0] -= dt * (delta[..., 1:] - delta[..., :-1])
        H = H_lim
    out = final / dx[:, None]
    if mpp:
        out = rescale_coeffs(out, k, bounds, strict=False)
    if config.limiter == "tvb":
        out = tvb_coeffs(out, k, dx, config.tvb_M, grid.periodic)
    return out, H, b, theta


def _reverse(fn, t: float):
    return lambda x, s: -fn(x, 2.0 * t - s)


def reversed_config(config: SchemeConfig, t: float) -> SchemeConfig:
    """Scheme for ``u_s - (a(x, 2t - s) u)_x = 0``: a backward step from ``t`` run forward."""
    if config.inflow is not None:
        raise ValueError("backward steps are not supported with inflow boundaries")
    rule = config.rule
    return replace(
        config,
        velocity=_reverse(config.velocity, t),
        rule=SpeedRule(_reverse(rule.edge_speed, t), _reverse(rule.cell_speed, t), rule.name),
    )


def step_coeffs(coeffs: np.ndarray, grid: Grid1D, config: SchemeConfig, dt: float, t: float = 0.0):
    """Advance raw coefficients by one step; returns (coeffs, StepInfo).

    A negative ``dt`` is run as a forward step of the time-reversed problem, so
    the numerical viscosity stays dissipative.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if dt < 0:
        out, info = step_coeffs(coeffs, grid, reversed_config(config, t), -dt, t)
        info.t, info.dt = t, dt
        return out, info
    mass_before = _mass_of(coeffs, grid.dx)
    if grid.periodic or config.inflow is None:
        out, H, b, theta = _step_grid(coeffs, grid, config, t, dt, config.velocity, config.rule)
        if grid.periodic:
            expected = mass_before
        else:
            expected = float(np.sum(b[..., 0]) - dt * np.sum(H[..., -1] - H[..., 0]))
        info = StepInfo(t, dt, mass_before, _mass_of(out, grid.dx), expected, H, theta)
        return out, info

    bnd = config.inflow
    velocity = extended_velocity(config.velocity, grid, bnd)
    rule = config.rule
    if bnd.extrapolate:
        rule = SpeedRule(
            extended_velocity(rule.edge_speed, grid, bnd),
            extended_velocity(rule.cell_speed, grid, bnd),
            rule.name,
        )
    nu_max = float(np.max(np.abs(rule.edge_speed(grid.x_edges, t + dt))))
    edge_dx = grid.dx[0] if bnd.side == "left" else grid.dx[-1]
    offsets = ghost_offsets(nu_max, dt, edge_dx, config.tableau.stages)
    ext, ext_grid, region = extend_grid(coeffs, grid, config.k, bnd, velocity, t, dt, offsets)
    out, H, b, theta = _step_grid(ext, ext_grid, config, t, dt, velocity, rule)
    keep = interior_slice(grid, region)
    out = out[..., keep, :]
    H_in = H[..., keep.start : keep.stop + 1]
    expected = float(np.sum(b[..., keep, 0]) - dt * np.sum(H_in[..., -1] - H_in[..., 0]))
    info = StepInfo(t, dt, mass_before, _mass_of(out, grid.dx), expected, H_in, theta)
    return np.ascontiguousarray(out), info


def step(field_n: DGField, config: SchemeConfig, dt: float, t: float = 0.0) -> DGField:
    """One GEL DG step of length ``dt`` starting at ``t``."""
    if field_n.k != config.k:
        raise ValueError(f"field degree {field_n.k} differs from scheme degree {config.k}")
    out, _ = step_coeffs(field_n.coeffs, field_n.grid, config, dt, t)
    return DGField(field_n.grid, field_n.k, out)


def max_speed(config: SchemeConfig, grid: Grid1D, t: float = 0.0) -> float:
    if config.max_speed is not None:
        return float(config.max_speed)
    z, _ = reference_rule(config.k + 2)
    x = grid.centers[:, None] + grid.dx[:, None] * z
    return float(np.max(np.abs(config.velocity(np.concatenate([grid.x_edges, x.ravel()]), t))))


def time_steps(T: float, dt: float) -> list[float]:
    """Uniform steps of size ``dt`` with the last one clipped to land on ``T``."""
    if T <= 0:
        raise ValueError(f"final time must be positive, got {T}")
    n_full = int(np.floor(T / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = T - n_full * dt
    if rest > 1e-12 * T:
        steps.append(rest)
    elif steps:
        steps[-1] += rest
    return steps


def advance(
    field_0: DGField,
    config: SchemeConfig,
    T: float,
    cfl: float,
    t0: float = 0.0,
    callback: Optional[Callable] = None,
) -> DGField:
    """March to ``t0 + T`` with ``dt = CFL * dx / max|a|``.

    ``callback(t, coeffs, info)`` is called after every step.
    """
    grid = field_0.grid
    speed = max_speed(config, grid, t0)
    if speed <= 0:
        raise ValueError("velocity vanishes identically; the time step is undefined")
    dt = cfl * float(np.min(grid.dx)) / speed
    coeffs = field_0.coeffs
    t = t0
    for h in time_steps(T, dt):
        coeffs, info = step_coeffs(coeffs, grid, config, h, t)
        t += h
        if callback is not None:
            callback(t, coeffs, info)
    return DGField(grid, field_0.k, coeffs)
