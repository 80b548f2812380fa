"""Stationary Fokker-Planck solver assembled as the adjoint of the HJB linearization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import FlowPair
from .errors import NonPositive, SingularSystem
from .grid import Grid, check_scalar, laplacian_matrix, lp_norm
from .upwind import UpwindDrift, advection_matrix, as_drift, upwind_flux


@dataclass
class DensitySolution:
    m: np.ndarray
    min_value: float
    residual_inf: float
    pinned_cell: int = 0

    def to_dict(self) -> dict:
        return {"min_value": self.min_value, "residual_inf": self.residual_inf, "pinned_cell": self.pinned_cell}


def fp_matrix(g: Grid, b) -> sp.csr_matrix:
    """Matrix of m -> -lap m - div(m b), the transpose of -lap + (advection of b)."""
    drift = as_drift(g, b)
    return (-laplacian_matrix(g) + advection_matrix(g, drift)).T.tocsr()


def solve_stationary(g: Grid, b, *, pin: int | None = None, m_prev=None) -> DensitySolution:
    """Density with zero-flux walls and unit mass for the drift ``b``.

    ``b`` is a face vector field or an :class:`UpwindDrift`.  The mass
    condition replaces the equation of cell ``pin``; by default the cell
    where ``m_prev`` is largest, or cell 0.

    Raises:
        SingularSystem: if the factorization fails.
        NonPositive: if the returned density has a nonpositive entry.
    """
    mat = fp_matrix(g, b).tolil()
    if pin is None:
        pin = 0 if m_prev is None else int(np.argmax(np.asarray(m_prev)))
    mat[pin, :] = np.full(g.size, g.cell_volume)
    rhs = np.zeros(g.size)
    rhs[pin] = 1.0
    try:
        m = splu(mat.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystem(f"Fokker-Planck system: {exc}") from exc
    if not np.all(np.isfinite(m)):
        raise SingularSystem("non-finite Fokker-Planck solution")
    m = m.reshape(g.shape)
    residual = fp_matrix(g, b) @ m.ravel()
    min_value = float(m.min())
    if min_value <= 0:
        raise NonPositive(f"density minimum {min_value:.3e}")
    return DensitySolution(m, min_value, float(np.abs(residual).max()), pin)


def fp_flux_pair(g: Grid, sol: DensitySolution | np.ndarray, b) -> FlowPair:
    """(m, w) with w = -m b on faces, density taken upwind."""
    m = sol.m if isinstance(sol, DensitySolution) else check_scalar(g, sol)
    return FlowPair(m, upwind_flux(g, as_drift(g, b), m))


def drift_norm(g: Grid, b, n: int | None = None) -> float:
    """Discrete L^N norm of the drift magnitude (N defaults to the grid dimension)."""
    drift = as_drift(g, b)
    return lp_norm(g, drift.cell_magnitude(), g.dim if n is None else n)


def drift_smallness_check(g: Grid, b, ce: float, cs: float, n: int | None = None) -> bool:
    """||b||_N <= 1 / (2 C_E C_S), inclusive up to round-off."""
    bound = 1.0 / (2.0 * ce * cs)
    return drift_norm(g, b, n) <= bound * (1.0 + 1e-12)


__all__ = [
    "DensitySolution",
    "UpwindDrift",
    "drift_norm",
    "drift_smallness_check",
    "fp_flux_pair",
    "fp_matrix",
    "solve_stationary",
]
