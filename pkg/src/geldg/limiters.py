"""Maximum-principle and positivity limiters, plus a TVB slope limiter.

All kernels act on modal coefficient arrays of shape (..., N, k+1) so they can
be applied inside the stepping loop; :class:`~geldg.field.DGField` wrappers
are provided for convenience.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BoundViolationError, LimiterPreconditionError
from .quadrature import basis_table, reference_rule

AVERAGE_TOL = 1e-13


@dataclass(frozen=True)
class Bounds:
    u_m: float
    u_M: float

    def __post_init__(self):
        if not self.u_m <= self.u_M:
            raise ValueError(f"lower bound {self.u_m} exceeds upper bound {self.u_M}")

    @classmethod
    def positivity(cls) -> "Bounds":
        return cls(0.0, np.inf)

    @property
    def scale(self) -> float:
        finite = [abs(v) for v in (self.u_m, self.u_M) if np.isfinite(v)]
        return max([1.0] + finite)


@dataclass
class ThetaRecord:
    theta: np.ndarray
    upper_active: np.ndarray
    lower_active: np.ndarray

    @property
    def n_limited(self) -> int:
        return int(np.count_nonzero(self.theta < 1.0))

    @property
    def min_theta(self) -> float:
        return float(np.min(self.theta)) if self.theta.size else 1.0


def _sample_table(k: int) -> np.ndarray:
    z, _ = reference_rule(k + 2)
    pts = np.concatenate(([-0.5], z, [0.5]))
    return basis_table(k, pts)


def sample_values(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Values at the extrema-check points: k+2 Gauss nodes plus both endpoints."""
    return coeffs @ _sample_table(k).T


@lru_cache(maxsize=None)
def _power_matrix(k: int) -> np.ndarray:
    """Row m holds the monomial coefficients of Psi_m in s = 2r."""
    out = np.zeros((k + 1, k + 1))
    for m in range(k + 1):
        e = np.zeros(m + 1)
        e[m] = 1.0
        out[m, : m + 1] = np.sqrt(2 * m + 1) * np.polynomial.legendre.leg2poly(e)
    return out


def critical_points(coeffs: np.ndarray, k: int) -> np.ndarray | None:
    """Interior stationary points of each cell polynomial (clipped to the cell).

    Cells without a real stationary point get ``r = 0``, which is harmless for
    extremum estimates.  Returns None for k <= 1.
    """
    if k <= 1:
        return None
    if k > 3:
        raise ValueError("exact extrema are only implemented for k <= 3")
    p = coeffs @ _power_matrix(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == 2:
            roots = (-p[..., 1] / (2.0 * p[..., 2]))[..., None]
        else:
            qa, qb, qc = 3.0 * p[..., 3], 2.0 * p[..., 2], p[..., 1]
            disc = np.sqrt(qb * qb - 4.0 * qa * qc)
            roots = np.stack([(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)], axis=-1)
    roots = np.nan_to_num(roots, nan=0.0, posinf=0.0, neginf=0.0)
    return np.clip(0.5 * roots, -0.5, 0.5)


def cell_extrema(coeffs: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Min and max of each cell polynomial over Gauss nodes, endpoints and stationary points."""
    vals = sample_values(coeffs, k)
    r = critical_points(coeffs, k)
    if r is not None:
        extra = np.einsum("...nqm,...nm->...nq", basis_table(k, r), coeffs)
        vals = np.concatenate([vals, extra], axis=-1)
    return vals.min(axis=-1), vals.max(axis=-1)


def rescale_coeffs(coeffs: np.ndarray, k: int, bounds: Bounds, strict: bool = True) -> np.ndarray:
    """Zhang-Shu polynomial rescaling toward the cell average.

    With ``strict=False`` cells whose average is already out of bounds are
    flattened to the average instead of raising.
    """
    if k == 0:
        return coeffs.copy()
    mean = coeffs[..., 0]
    tol = AVERAGE_TOL * bounds.scale
    if strict and (np.any(mean > bounds.u_M + tol) or np.any(mean < bounds.u_m - tol)):
        worst = float(np.max(np.maximum(mean - bounds.u_M, bounds.u_m - mean)))
        raise BoundViolationError(f"cell average outside bounds by {worst:.3e}")
    vmin, vmax = cell_extrema(coeffs, k)
    up = vmax - mean
    down = mean - vmin
    with np.errstate(divide="ignore", invalid="ignore"):
        th_up = np.where(up > 0, (bounds.u_M - mean) / up, np.inf)
        th_down = np.where(down > 0, (mean - bounds.u_m) / down, np.inf)
    theta = np.clip(np.minimum(1.0, np.minimum(th_up, th_down)), 0.0, 1.0)
    out = coeffs.copy()
    out[..., 1:] *= theta[..., None]
    return out


def rescale_mpp(field, bounds: Bounds):
    """Rescaled copy of a :class:`DGField`; cell averages are untouched."""
    out = field.copy()
    out.coeffs = rescale_coeffs(field.coeffs, field.k, bounds)
    return out


def first_order_flux(ubar_left, ubar_right, a_edge, nu_edge, alpha1):
    """Lax-Friedrichs flux of the first-order scheme on cell averages."""
    s = np.asarray(a_edge) - np.asarray(nu_edge)
    return 0.5 * s * (ubar_left + ubar_right) - 0.5 * alpha1 * (ubar_right - ubar_left)


def _neighbors(v: np.ndarray, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Values left and right of each edge (N+1 edges) from per-cell values."""
    if periodic:
        left = np.concatenate([v[..., -1:], v], axis=-1)
        right = np.concatenate([v, v[..., :1]], axis=-1)
    else:
        left = np.concatenate([v[..., :1], v], axis=-1)
        right = np.concatenate([v, v[..., -1:]], axis=-1)
    return left, right


def first_order_edge_fluxes(ubar_tilde, a_edge, nu, periodic: bool):
    """Edge fluxes of the monotone scheme with global ``alpha_1 = max |a - nu|``."""
    left, right = _neighbors(ubar_tilde, periodic)
    s = a_edge - nu
    alpha1 = np.max(np.abs(s), axis=-1, keepdims=True)
    h = first_order_flux(left, right, a_edge, nu, alpha1)
    if periodic:
        h[..., -1] = h[..., 0]
    return h, alpha1


def mpp_flux_limit(
    H_rk: np.ndarray,
    h: np.ndarray,
    ubar_tilde: np.ndarray,
    upstream_widths: np.ndarray,
    dx: np.ndarray,
    dt: float,
    bounds: Bounds,
    periodic: bool = True,
) -> ThetaRecord:
    """Parametrized flux limiter on the time-combined final-stage flux.

    For each cell the positive (negative) antidiffusive contributions of its two
    edges are scaled together so the update cannot exceed ``u_M`` (``u_m``); an
    edge takes the smaller allowance of its two cells.  ``theta = 0`` recovers
    the first-order flux.
    """
    lam = dt / dx
    first = (upstream_widths / dx) * ubar_tilde - lam * (h[..., 1:] - h[..., :-1])
    gam_M = bounds.u_M - first
    gam_m = bounds.u_m - first
    tol = 1e-12 * bounds.scale
    if np.any(gam_M < -tol) or np.any(gam_m > tol):
        worst = float(np.max(np.maximum(-gam_M, gam_m)))
        raise LimiterPreconditionError(
            f"first-order update leaves the bounds by {worst:.3e}; reduce the time step"
        )
    gam_M = np.maximum(gam_M, 0.0)
    gam_m = np.minimum(gam_m, 0.0)

    anti = H_rk - h
    f_left = lam * anti[..., :-1]
    f_right = lam * anti[..., 1:]
    # cell update deviation is f_left*theta_left - f_right*theta_right
    inc_left, inc_right = np.maximum(f_left, 0.0), np.maximum(-f_right, 0.0)
    dec_left, dec_right = np.maximum(-f_left, 0.0), np.maximum(f_right, 0.0)
    inc, dec = inc_left + inc_right, dec_left + dec_right
    with np.errstate(divide="ignore", invalid="ignore"):
        lim_up = np.where(inc > gam_M, gam_M / inc, 1.0)
        lim_lo = np.where(dec > -gam_m, -gam_m / dec, 1.0)
    lim_up = np.nan_to_num(lim_up, nan=1.0, posinf=1.0)
    lim_lo = np.nan_to_num(lim_lo, nan=1.0, posinf=1.0)
    ones = np.ones_like(lim_up)
    left_allow = np.minimum(np.where(inc_left > 0, lim_up, ones), np.where(dec_left > 0, lim_lo, ones))
    right_allow = np.minimum(np.where(inc_right > 0, lim_up, ones), np.where(dec_right > 0, lim_lo, ones))
    up_flag = inc > gam_M
    lo_flag = dec > -gam_m

    # edge e sits right of cell e-1 and left of cell e
    if periodic:
        wrap_right, wrap_left = right_allow[..., -1:], left_allow[..., :1]
    else:
        wrap_right = wrap_left = np.ones_like(right_allow[..., :1])
    from_left_cell = np.concatenate([wrap_right, right_allow], axis=-1)
    from_right_cell = np.concatenate([left_allow, wrap_left], axis=-1)
    theta = np.clip(np.minimum(from_left_cell, from_right_cell), 0.0, 1.0)
    if periodic:
        theta[..., -1] = theta[..., 0]
    up_edge = np.zeros(theta.shape, dtype=bool)
    lo_edge = np.zeros(theta.shape, dtype=bool)
    up_edge[..., :-1] |= up_flag
    up_edge[..., 1:] |= up_flag
    lo_edge[..., :-1] |= lo_flag
    lo_edge[..., 1:] |= lo_flag
    return ThetaRecord(theta, up_edge & (theta < 1), lo_edge & (theta < 1))


def _minmod(*args):
    a = np.stack(np.broadcast_arrays(*args))
    same = np.all(a > 0, axis=0) | np.all(a < 0, axis=0)
    return np.where(same, np.sign(a[0]) * np.min(np.abs(a), axis=0), 0.0)


def tvb_coeffs(coeffs: np.ndarray, k: int, dx: np.ndarray, M: float, periodic: bool = True) -> np.ndarray:
    """TVB-modified minmod on the linear part; flagged cells drop higher modes."""
    if k == 0:
        return coeffs.copy()
    mean = coeffs[..., 0]
    ends = basis_table(k, np.array([-0.5, 0.5]))
    right_dev = coeffs[..., 1:] @ ends[1, 1:]
    left_dev = -(coeffs[..., 1:] @ ends[0, 1:])
    if periodic:
        d_plus = np.roll(mean, -1, axis=-1) - mean
        d_minus = mean - np.roll(mean, 1, axis=-1)
    else:
        diff = np.diff(mean, axis=-1)
        d_plus = np.concatenate([diff, diff[..., -1:]], axis=-1)
        d_minus = np.concatenate([diff[..., :1], diff], axis=-1)
    thresh = M * dx**2

    def tvb_mod(a):
        return np.where(np.abs(a) <= thresh, a, _minmod(a, d_plus, d_minus))

    flagged = (tvb_mod(right_dev) != right_dev) | (tvb_mod(left_dev) != left_dev)
    out = coeffs.copy()
    if np.any(flagged):
        sqrt3 = np.sqrt(3.0)
        slope = _minmod(sqrt3 * coeffs[..., 1], d_plus, d_minus) / sqrt3
        out[..., 1] = np.where(flagged, slope, coeffs[..., 1])
        out[..., 2:] = np.where(flagged[..., None], 0.0, coeffs[..., 2:])
    return out


def tvb_minmod(field, M: float):
    out = field.copy()
    out.coeffs = tvb_coeffs(field.coeffs, field.k, field.grid.dx, M, field.grid.periodic)
    return out
