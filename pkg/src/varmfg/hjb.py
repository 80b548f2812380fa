"""Ergodic Hamilton-Jacobi solver and barrier diagnostics.

Solves -lap u + H(grad u) + lam = f with Neumann walls and zero mean u by
Newton's method on the bordered (u, lam) system.  The default ``upwind``
scheme is the monotone Godunov discretization of the power Hamiltonian:

    H_G(u)_i = (c / gamma) |P_i|^gamma,
    P_i = (min(D+_k u, 0), max(D-_k u, 0))_k,

which is exactly the Hamiltonian dual to the upwind kinetic term of
:mod:`varmfg.energy`.  The ``centered`` scheme averages the two face
differences of each cell instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import BadParameter, NewtonDiverged, NoBarrier, SingularSystem
from .grid import (
    Grid,
    cell_magnitude,
    cell_vectors,
    check_scalar,
    faces_behind,
    gradient,
    laplacian_matrix,
    laplacian_neumann,
    lp_norm,
    mean,
    poisson_neumann_zero_mean,
)
from .model import Hamiltonian
from .upwind import UpwindDrift, advection_matrix, axis_difference_matrices, backward_difference_matrices

log = logging.getLogger(__name__)

SCHEMES = ("upwind", "centered")


@dataclass
class ErgodicSolution:
    u: np.ndarray
    lam: float
    residual_inf: float
    newton_iters: int
    scheme: str = "upwind"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual_inf": self.residual_inf,
            "newton_iters": self.newton_iters,
            "scheme": self.scheme,
        }


def upwind_arguments(g: Grid, u) -> np.ndarray:
    """Godunov arguments P of every cell, shape ``(2 * dim, *shape)``."""
    du = gradient(g, u)
    return np.concatenate([np.minimum(du, 0.0), np.maximum(faces_behind(g, du), 0.0)], axis=0)


def discrete_hamiltonian(g: Grid, h: Hamiltonian, u, scheme: str = "upwind") -> tuple[np.ndarray, UpwindDrift]:
    """Cell values of the numerical Hamiltonian and its derivative coefficients."""
    u = check_scalar(g, u)
    d = g.dim
    if scheme == "upwind":
        p = upwind_arguments(g, u)
        dh = h.grad(p)
        return h.value(p), UpwindDrift(dh[:d], dh[d:])
    if scheme == "centered":
        p = cell_vectors(g, gradient(g, u))
        dh = h.grad(p)
        return h.value(p), UpwindDrift(0.5 * dh, 0.5 * dh)
    raise BadParameter(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def godunov_drift(g: Grid, h: Hamiltonian, u) -> UpwindDrift:
    """grad H(grad u) in one-sided form; feeds the Fokker-Planck solver."""
    return discrete_hamiltonian(g, h, u, "upwind")[1]


def hjb_residual(g: Grid, h: Hamiltonian | None, u, lam: float, f, scheme: str = "upwind") -> np.ndarray:
    u = check_scalar(g, u)
    ham = 0.0 if h is None else discrete_hamiltonian(g, h, u, scheme)[0]
    return -laplacian_neumann(g, u) + ham + lam - check_scalar(g, f)


def hjb_jacobian(g: Grid, h: Hamiltonian | None, u, scheme: str = "upwind") -> sp.csr_matrix:
    """Derivative of u -> -lap u + H(u) (without the lam column)."""
    jac = -laplacian_matrix(g)
    if h is None:
        return jac.tocsr()
    drift = discrete_hamiltonian(g, h, u, scheme)[1]
    if scheme == "centered":
        # The centred difference of a cell is the mean of its two one-sided differences.
        mats = [
            0.5 * (sp.diags(drift.forward[k].ravel()) + sp.diags(drift.backward[k].ravel())) @ (dp + dm)
            for k, (dp, dm) in enumerate(zip(axis_difference_matrices(g), backward_difference_matrices(g)))
        ]
        return (jac + sum(mats)).tocsr()
    return (jac + advection_matrix(g, drift)).tocsr()


def _bordered(g: Grid, jac: sp.spmatrix) -> sp.csc_matrix:
    ones = sp.csr_matrix(np.ones((g.size, 1)))
    vol = sp.csr_matrix(np.full((1, g.size), g.cell_volume))
    return sp.bmat([[jac, ones], [vol, None]], format="csc")


def solve_linear_shift(g: Grid, f) -> ErgodicSolution:
    """Exact solution of -lap u + lam = f, zero-mean u, lam = mean(f)."""
    f = check_scalar(g, f)
    lam = mean(g, f)
    u = poisson_neumann_zero_mean(g, lam - f, tol_compat=1e-8 * max(1.0, float(np.abs(f).max())))
    res = float(np.abs(-laplacian_neumann(g, u) + lam - f).max())
    return ErgodicSolution(u, lam, res, 0, "linear")


def solve_ergodic(
    g: Grid,
    h: Hamiltonian | None,
    f,
    *,
    scheme: str = "upwind",
    tol: float = 1e-9,
    max_iters: int = 200,
    max_halvings: int = 30,
    u0=None,
    lam0: float | None = None,
) -> ErgodicSolution:
    """Damped Newton iteration on the bordered (u, lam) system.

    Raises:
        NewtonDiverged: if the residual does not drop below ``tol`` within
            ``max_iters`` iterations or a step cannot be damped successfully.
    """
    f = check_scalar(g, f)
    if scheme not in SCHEMES:
        raise BadParameter(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if h is None:
        return solve_linear_shift(g, f)
    if u0 is None:
        init = solve_linear_shift(g, f)
        u, lam = init.u, init.lam
    else:
        u = check_scalar(g, u0).copy()
        u = u - mean(g, u)
        lam = mean(g, f) if lam0 is None else float(lam0)
    res = hjb_residual(g, h, u, lam, f, scheme)
    rnorm = float(np.abs(res).max())
    it = 0
    while rnorm > tol:
        if it >= max_iters:
            raise NewtonDiverged(f"no convergence in {max_iters} iterations (residual {rnorm:.3e})", rnorm, it)
        it += 1
        mat = _bordered(g, hjb_jacobian(g, h, u, scheme))
        try:
            step = splu(mat).solve(np.append(-res.ravel(), 0.0))
        except RuntimeError as exc:
            raise SingularSystem(f"Newton system: {exc}") from exc
        du, dlam = step[:-1].reshape(g.shape), step[-1]
        t = 1.0
        for _ in range(max_halvings + 1):
            u_new, lam_new = u + t * du, lam + t * dlam
            res_new = hjb_residual(g, h, u_new, lam_new, f, scheme)
            rnew = float(np.abs(res_new).max())
            if np.isfinite(rnew) and rnew < rnorm:
                break
            t *= 0.5
        else:
            raise NewtonDiverged(f"damping exhausted at iteration {it} (residual {rnorm:.3e})", rnorm, it)
        u, lam, res, rnorm = u_new - mean(g, u_new), lam_new, res_new, rnew
        log.debug("newton %d: residual %.3e step %.3g", it, rnorm, t)
    return ErgodicSolution(u, float(lam), rnorm, it, scheme)


def barrier_levels(c_model: float, gamma: float, delta: float, c_prime: float = 1.0) -> tuple[float, float]:
    """The two positive roots y1 < y2 of y = C y**gamma + C' delta.

    Raises:
        NoBarrier: if delta is at or beyond the fold, where the roots merge.
    """
    if not gamma > 1 or not c_model > 0 or not c_prime > 0:
        raise BadParameter("need gamma > 1 and positive constants")
    if not delta > 0:
        raise BadParameter(f"delta must be positive, got {delta}")

    def gap(y: float) -> float:
        return c_model * y**gamma + c_prime * delta - y

    fold = (1.0 / (c_model * gamma)) ** (1.0 / (gamma - 1.0))
    if gap(fold) >= 0:
        raise NoBarrier(f"delta={delta} is above the fold value {(fold - c_model * fold**gamma) / c_prime:.6g}")
    upper = 2.0 * fold
    while gap(upper) <= 0:
        upper *= 2.0
    y1 = brentq(gap, 0.0, fold, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    y2 = brentq(gap, fold, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(y1), float(y2)


def gradient_norm_report(g: Grid, sol: ErgodicSolution | np.ndarray, gamma: float, n: int) -> float:
    """Discrete L^{N(gamma-1)} norm of grad u (face differences averaged to cells)."""
    u = sol.u if isinstance(sol, ErgodicSolution) else sol
    return lp_norm(g, cell_magnitude(g, gradient(g, u)), n * (gamma - 1.0))
