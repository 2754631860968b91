"""Gauss-Legendre rules and the scaled Legendre basis on the reference cell.

The reference cell is ``r in [-1/2, 1/2]``; the basis is
``Psi_m(r) = sqrt(2m+1) P_m(2r)`` so that ``int Psi_l Psi_m dr = delta_lm``.
Evaluation outside the reference cell is the natural polynomial extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_NODES = 16


@dataclass(frozen=True)
class GaussRule:
    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def on_reference_cell(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes mapped to [-1/2, 1/2] and weights summing to 1."""
        return 0.5 * self.nodes, 0.5 * self.weights


@lru_cache(maxsize=None)
def _gauss(n: int) -> GaussRule:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    # enforce exact symmetry so rules are reproducible to the last bit
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GaussRule(n, nodes, weights)


def gauss_legendre(n: int) -> GaussRule:
    """Return the ``n``-point Gauss-Legendre rule on [-1, 1]."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_NODES:
        raise ValueError(f"node count must be an integer in [1, {MAX_NODES}], got {n!r}")
    return _gauss(int(n))


def reference_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return gauss_legendre(n).on_reference_cell()


@lru_cache(maxsize=None)
def _norms(k: int) -> np.ndarray:
    out = np.sqrt(2.0 * np.arange(k + 1) + 1.0)
    out.setflags(write=False)
    return out


def _legendre(k: int, s: np.ndarray) -> np.ndarray:
    """Unscaled ``P_0..P_k`` at ``s``, shape ``s.shape + (k+1,)``."""
    p = [np.ones_like(s), s]
    for m in range(1, k):
        p.append(((2 * m + 1) * s * p[m] - m * p[m - 1]) / (m + 1))
    return np.stack(p[: k + 1], axis=-1)


def basis_table(k: int, r) -> np.ndarray:
    """Values of ``Psi_0..Psi_k`` at ``r``; result has shape ``r.shape + (k+1,)``."""
    s = 2.0 * np.asarray(r, dtype=float)
    out = _legendre(k, s)
    out *= _norms(k)
    return out


def basis_deriv_table(k: int, r) -> np.ndarray:
    """Derivatives ``dPsi_m/dr`` for ``m = 0..k``, same layout as :func:`basis_table`."""
    s = 2.0 * np.asarray(r, dtype=float)
    dp = np.zeros(s.shape + (k + 1,))
    if k == 0:
        return dp
    p = _legendre(k - 1, s)
    # P'_{m+1} = P'_{m-1} + (2m+1) P_m
    dp[..., 1] = 1.0
    for m in range(1, k):
        dp[..., m + 1] = dp[..., m - 1] + (2 * m + 1) * p[..., m]
    dp *= 2.0 * _norms(k)
    return dp


def _check_index(k: int, m: int) -> None:
    if k < 0 or not 0 <= m <= k:
        raise ValueError(f"basis index m={m} outside 0..{k}")


def basis_eval(k: int, m: int, r):
    """``Psi_m(r)`` for a degree-``k`` basis."""
    _check_index(k, m)
    val = basis_table(m, r)[..., m]
    return float(val) if np.ndim(val) == 0 else val


def basis_deriv(k: int, m: int, r):
    """``dPsi_m/dr`` for a degree-``k`` basis."""
    _check_index(k, m)
    val = basis_deriv_table(m, r)[..., m]
    return float(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=None)
def gauss_basis(k: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference nodes, weights and basis table for an ``n``-point rule (cached)."""
    z, w = reference_rule(n)
    phi = basis_table(k, z)
    phi.setflags(write=False)
    return z, w, phi


@lru_cache(maxsize=None)
def end_values(k: int) -> np.ndarray:
    """Basis values at the left and right cell ends, shape (2, k+1)."""
    out = basis_table(k, np.array([-0.5, 0.5]))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def nodal_to_modal(k: int) -> np.ndarray:
    """Inverse Vandermonde mapping values at the (k+1) Gauss nodes to coefficients."""
    z, _ = reference_rule(k + 1)
    vinv = np.linalg.inv(basis_table(k, z))
    vinv.setflags(write=False)
    return vinv


@lru_cache(maxsize=None)
def modal_to_nodal(k: int) -> np.ndarray:
    z, _ = reference_rule(k + 1)
    v = basis_table(k, z)
    v.setflags(write=False)
    return v
