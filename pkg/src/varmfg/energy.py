"""The energy E(m, w) on the discrete constraint set and related quantities.

Fluxes are face vector fields (see :mod:`varmfg.grid`).  The kinetic term
charges each face flux to the cell it leaves: cell ``i`` pays for the
positive part of the flux on its forward faces and the negative part of the
flux on its backward faces.  Collecting those ``2 * dim`` one-sided values
into a vector ``Q_i`` gives the kinetic density ``m_i L(|Q_i| / m_i)``.
This split is jointly convex in ``(m, w)``, continuously differentiable in
``w``, and its optimality conditions are the monotone upwind
Hamilton-Jacobi scheme and its adjoint Fokker-Planck scheme.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import (
    Grid,
    check_scalar,
    check_vector,
    divergence,
    faces_ahead,
    faces_behind,
    gradient,
    integrate,
    laplacian_neumann,
    lp_norm,
)
from .model import INFEASIBLE, Coupling, Lagrangian, Mollifier, kinetic_density, mollified_potential

M_FLOOR = 1e-10


@dataclass
class FlowPair:
    """Density ``m`` (cell field) and flux ``w`` (face field)."""

    m: np.ndarray
    w: np.ndarray


@dataclass
class EnergyReport:
    kinetic: float
    potential: float
    total: float
    e_quantity: float
    lq_norm_q: float
    fp_residual: float
    clamped_cells: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def trivial_pair(g: Grid) -> FlowPair:
    return FlowPair(g.constant(1.0 / g.volume), g.zero_vector())


def upwind_parts(g: Grid, w) -> np.ndarray:
    """One-sided flux vector of every cell, shape ``(2 * dim, *shape)``.

    Rows ``0..dim-1`` hold the outgoing positive flux through the forward
    faces, rows ``dim..2*dim-1`` the outgoing negative flux through the
    backward faces.
    """
    w = check_vector(g, w)
    return np.concatenate([np.maximum(w, 0.0), np.minimum(faces_behind(g, w), 0.0)], axis=0)


def upwind_parts_adjoint(g: Grid, w, dq: np.ndarray) -> np.ndarray:
    """Pull a derivative with respect to :func:`upwind_parts` back to the faces of ``w``."""
    w = check_vector(g, w)
    d = g.dim
    return dq[:d] * (w > 0) + faces_ahead(g, dq[d:]) * (w < 0)


def fp_constraint_residual(g: Grid, p: FlowPair) -> float:
    """L2 norm of lap(m) - div(w); zero exactly on the constraint set."""
    r = laplacian_neumann(g, p.m) - divergence(g, p.w)
    return float(np.sqrt(np.sum(r * r) * g.cell_volume))


def _clamp(m: np.ndarray, m_floor: float) -> tuple[np.ndarray, int]:
    low = (m > 0) & (m < m_floor)
    return np.where(low, m_floor, m), int(np.count_nonzero(low))


def kinetic_field(g: Grid, p: FlowPair, lag: Lagrangian, m_floor: float = M_FLOOR) -> tuple[np.ndarray, int]:
    """Cellwise kinetic density with the m_floor clamp; INFEASIBLE entries for m <= 0 with flux."""
    m = check_scalar(g, p.m)
    m_eff, clamped = _clamp(m, m_floor)
    return kinetic_density(m_eff, upwind_parts(g, p.w), lag), clamped


def _report(g: Grid, p: FlowPair, lag: Lagrangian, potential: float, q: float, m_floor: float) -> EnergyReport:
    kin_cells, clamped = kinetic_field(g, p, lag, m_floor)
    kinetic = float(np.sum(kin_cells) * g.cell_volume)
    e_quantity = kinetic / lag.coef
    m = check_scalar(g, p.m)
    lq = integrate(g, np.abs(m) ** q)
    total = kinetic + potential
    if not np.isfinite(total):
        total = INFEASIBLE
    return EnergyReport(kinetic, potential, total, e_quantity, lq, fp_constraint_residual(g, p), clamped)


def energy(g: Grid, p: FlowPair, lag: Lagrangian, c: Coupling, m_floor: float = M_FLOOR) -> EnergyReport:
    """Kinetic term plus integral of F(x, m)."""
    m = check_scalar(g, p.m)
    potential = float(np.sum(c.F(m)) * g.cell_volume)
    return _report(g, p, lag, potential, c.q, m_floor)


def energy_regularized(
    g: Grid, p: FlowPair, lag: Lagrangian, c: Coupling, mol: Mollifier, m_floor: float = M_FLOOR
) -> EnergyReport:
    """Kinetic term plus F_eps[m] = integral of F(x, m * chi_eps)."""
    m = check_scalar(g, p.m)
    potential = mollified_potential(c, mol, m, g) if np.all(m >= 0) else INFEASIBLE
    return _report(g, p, lag, potential, c.q, m_floor)


def linearized_energy(g: Grid, p: FlowPair, lag: Lagrangian, f_frozen, m_floor: float = M_FLOOR) -> float:
    """Kinetic term plus integral of f_frozen * m."""
    kin_cells, _ = kinetic_field(g, p, lag, m_floor)
    f_frozen = check_scalar(g, f_frozen)
    return float(np.sum(kin_cells) * g.cell_volume + integrate(g, f_frozen * p.m))


def in_ball(g: Grid, p: FlowPair, alpha: float, q: float) -> tuple[bool, float]:
    """Whether ||m||_q^q <= alpha, and the margin alpha - ||m||_q^q."""
    margin = alpha - integrate(g, np.abs(check_scalar(g, p.m)) ** q)
    return bool(margin >= 0), float(margin)


def energy_lower_bound(report: EnergyReport, c_l: float, c_q: float, c: Coupling) -> float:
    """(C_L/C_q)||m||_q - C_L - (C_f/q)||m||_q^q - K_f for unit weights."""
    norm_q = report.lq_norm_q ** (1.0 / c.q)
    return (c_l / c_q) * norm_q - c_l - (c.c_f / c.q) * report.lq_norm_q - c.k_f


# --- random members of the constraint set ---------------------------------


def random_smooth_field(g: Grid, rng: np.random.Generator, modes: int = 6, decay: float = 1.5) -> np.ndarray:
    """Mean-free random cosine series with Neumann-compatible modes."""
    coords = g.mesh()
    out = np.zeros(g.shape)
    ks = np.arange(modes + 1)
    for idx in np.ndindex(*(modes + 1,) * g.dim):
        if sum(idx) == 0:
            continue
        amp = rng.normal() / (1.0 + float(np.sqrt(sum(k * k for k in idx)))) ** decay
        term = np.ones(g.shape)
        for axis, k in enumerate(idx):
            term = term * np.cos(np.pi * ks[k] * coords[axis] / g.lengths[axis])
        out += amp * term
    scale = np.max(np.abs(out))
    return out / scale if scale > 0 else out


def random_density(g: Grid, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    m = np.exp(amplitude * random_smooth_field(g, rng))
    return m / integrate(g, m)


def random_pair(g: Grid, rng: np.random.Generator, amplitude: float, solenoidal: float = 0.0) -> FlowPair:
    """Random member of the constraint set: w = grad m plus an optional divergence-free part."""
    m = random_density(g, rng, amplitude)
    w = gradient(g, m)
    if solenoidal and g.dim == 2:
        # Stream function on cell corners, zero on the walls; its discrete
        # curl is divergence free and has no normal flux.
        corner = np.zeros((g.cells + 1, g.cells + 1))
        corner[1:-1, 1:-1] = random_smooth_field(g, rng)[:-1, :-1]
        s = np.empty_like(w)
        s[0] = (corner[1:, 1:] - corner[1:, :-1]) / g.spacing[1]
        s[1] = -(corner[1:, 1:] - corner[:-1, 1:]) / g.spacing[0]
        w = w + solenoidal * s
    return FlowPair(m, w)


def cq_ratios(
    g: Grid, samples: int, q: float, gamma: float = 2.0, seed: int = 0, max_amplitude: float = 3.0
) -> np.ndarray:
    """||m||_q / (E + 1) for the trivial pair followed by ``samples - 1`` random pairs.

    E is the integral of |w|^gamma' / m^(gamma'-1) with the upwind flux split.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    lag = Lagrangian(gamma / (gamma - 1.0), 1.0, 1.0)
    out = np.empty(samples)
    for i in range(samples):
        p = trivial_pair(g) if i == 0 else random_pair(g, rng, rng.uniform(0.0, max_amplitude))
        kin, _ = kinetic_field(g, p, lag)
        out[i] = lp_norm(g, p.m, q) / (float(np.sum(kin) * g.cell_volume) + 1.0)
    return out


def estimate_cq(
    g: Grid, samples: int, q: float, gamma: float = 2.0, seed: int = 0, max_amplitude: float = 3.0
) -> float:
    """Empirical max of ||m||_q / (E + 1) over random pairs of the constraint set."""
    return float(np.max(cq_ratios(g, samples, q, gamma, seed, max_amplitude)))


def sobolev_exponents(n: int, gamma: float) -> tuple[float, float]:
    """(p, p*) used for the measured embedding constants.

    p* sits above the Sobolev-critical coupling exponent (midway to N when
    that exponent is finite), and p is its Sobolev conjugate.
    """
    gc = gamma / (gamma - 1.0)
    if gc < n:
        q_c = 1.0 + gc / (n - gc)
        p_star = 0.5 * (q_c + n) if q_c < n else q_c + 1.0
    else:
        p_star = 2.0 * n + 2.0
    p = n * p_star / (n + p_star)
    return p, p_star


def w1p_norm(g: Grid, s, p: float, w=None) -> float:
    """||s||_p + ||grad s||_p, using ``w`` in place of grad s when given."""
    grad = gradient(g, s) if w is None else check_vector(g, w)
    gnorm = float((np.sum(np.abs(grad) ** p) * g.cell_volume) ** (1.0 / p))
    return lp_norm(g, s, p) + gnorm


def estimate_embedding_constants(
    g: Grid, n: int, gamma: float, samples: int = 200, seed: int = 0, max_amplitude: float = 3.0
) -> tuple[float, float, float, float]:
    """Measured (C_E, C_S, p, p*) on random pairs.

    C_E is the max of ||m||_{1,p} / (||w||_p + ||m||_p) and C_S the max of
    ||m||_{p*} / ||m||_{1,p}.
    """
    p, p_star = sobolev_exponents(n, gamma)
    rng = np.random.default_rng(seed)
    c_e = c_s = 0.0
    for i in range(samples):
        if i == 0:
            pair = trivial_pair(g)
        else:
            pair = random_pair(g, rng, rng.uniform(0.0, max_amplitude), solenoidal=rng.uniform(0.0, 1.0))
        full = w1p_norm(g, pair.m, p)
        wn = float((np.sum(np.abs(pair.w) ** p) * g.cell_volume) ** (1.0 / p))
        c_e = max(c_e, full / (wn + lp_norm(g, pair.m, p)))
        c_s = max(c_s, lp_norm(g, pair.m, p_star) / full)
    return float(c_e), float(c_s), p, p_star
