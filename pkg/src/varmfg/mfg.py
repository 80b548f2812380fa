"""Full pipeline: minimize, recover (u, lam), check duality, continue in epsilon.

Also hosts the independent quadratic-Hamiltonian solver (square-root
substitution), the constructive energy experiments and the blow-up monitor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import EnergyReport, FlowPair, energy
from .errors import (
    BadParameter,
    BumpEscapesDomain,
    ContinuationDiverged,
    DualityFailed,
    InfeasibleEps,
    NoBarrier,
    NonConvergence,
)
from .exponents import ConstantsLedger, classify_regime
from .fp import fp_matrix, solve_stationary
from .grid import Grid, check_scalar, gradient, green_apply, integrate, laplacian_matrix
from .hjb import barrier_levels, godunov_drift, hjb_residual, solve_ergodic
from .minimizer import MinimizerConfig, MinimizeReport, minimize_local, minimize_multistart
from .model import Coupling, Hamiltonian, Lagrangian, Mollifier, mollified_coupling
from .upwind import upwind_flux

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    final_unmollified: bool = True
    tol_duality: float = 1e-6
    tol_system: float = 1e-6
    max_refresh: int = 20
    starts: int = 4
    start_amplitude: float = 0.5
    growth_factor: float = 10.0
    regime_override: str | None = None
    minimizer: MinimizerConfig = field(default_factory=lambda: MinimizerConfig(grad_tol=1e-8))

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise BadParameter("epsilons must be positive and strictly decreasing")
        if not eps and not self.final_unmollified:
            raise BadParameter("empty continuation ladder")
        if self.tol_duality <= 0 or self.tol_system <= 0 or self.starts < 1:
            raise BadParameter("tolerances must be positive and starts >= 1")

    def ladder(self) -> tuple[float, ...]:
        return self.epsilons + ((0.0,) if self.final_unmollified else ())


@dataclass
class StageRecord:
    epsilon: float
    sup_m: float
    lam: float
    energy: float
    lq_norm_q: float
    duality_residual: float
    density_mismatch: float
    refreshes: int
    interior_certified: bool


@dataclass
class MFGSolution:
    u: np.ndarray
    lam: float
    m: np.ndarray
    w: np.ndarray
    duality_residual: float
    system_residual: float
    energy: EnergyReport
    regime: str
    history: list = field(default_factory=list)
    epsilon: float = 0.0
    hjb_residual: float = math.nan
    fp_residual: float = math.nan
    density_mismatch: float = math.nan
    interior_certified: bool = True
    minimizer: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "duality_residual": self.duality_residual,
            "system_residual": self.system_residual,
            "hjb_residual": self.hjb_residual,
            "fp_residual": self.fp_residual,
            "density_mismatch": self.density_mismatch,
            "epsilon": self.epsilon,
            "regime": self.regime,
            "interior_certified": self.interior_certified,
            "energy": self.energy.to_dict(),
            "history": [asdict(r) for r in self.history],
            "minimizer": self.minimizer,
        }


def duality_residual(g: Grid, h: Hamiltonian, pair: FlowPair, u) -> float:
    """||w + m grad H(grad u)||_1 / (1 + ||w||_1) with the upwind flux of m."""
    dual = upwind_flux(g, godunov_drift(g, h, u), pair.m)
    gap = float(np.sum(np.abs(pair.w - dual)) * g.cell_volume)
    return gap / (1.0 + float(np.sum(np.abs(pair.w)) * g.cell_volume))


def system_residuals(g: Grid, h: Hamiltonian, c: Coupling, u, lam: float, m) -> tuple[float, float]:
    """Residuals of the unregularized HJB and Fokker-Planck equations.

    The HJB residual is the sup norm.  The Fokker-Planck residual r is
    measured in the weak norm ||grad G r||_2, i.e. the worst violation of
    the test-function identity over unit-gradient test functions; the sup
    norm of r carries a 1/h^2 factor that swamps optimizer tolerances.
    """
    m = check_scalar(g, m)
    r_hjb = float(np.abs(hjb_residual(g, h, u, lam, c.f(np.maximum(m, 0.0)))).max())
    r_fp = (fp_matrix(g, godunov_drift(g, h, u)) @ m.ravel()).reshape(g.shape)
    weak = gradient(g, green_apply(g, r_fp))
    return r_hjb, float(np.sqrt(np.sum(weak * weak) * g.cell_volume))


def fp_strong_residual(g: Grid, h: Hamiltonian, u, m) -> float:
    """Sup norm of -lap m - div(m grad H(grad u))."""
    m = check_scalar(g, m)
    return float(np.abs(fp_matrix(g, godunov_drift(g, h, u)) @ m.ravel()).max())


def trivial_system_residual(g: Grid, h: Hamiltonian, c: Coupling) -> float:
    """Residual of (u, lam, m) = (0, f(1), 1) in the discrete system."""
    u = g.constant(0.0)
    lam = float(np.mean(c.f(np.ones(g.shape))))
    return max(system_residuals(g, h, c, u, lam, g.constant(1.0)))


def solve_regularized(
    g: Grid,
    h: Hamiltonian,
    lag: Lagrangian,
    c: Coupling,
    mol: Mollifier,
    cfg: SolveConfig,
    *,
    w0=None,
    regime: str = "",
) -> MFGSolution:
    """Minimize E_eps, recover (u_eps, lam_eps) and check the duality relation.

    The minimizer is run from ``w0`` (the trivial flux if omitted) and from
    ``cfg.starts - 1`` seeded perturbations of it; the lowest energy is kept.
    The perturbations matter on warm starts too: a stage that converged to
    the trivial state would otherwise pin every later stage there.
    If the recovered pair is not dual to tolerance, the minimizer is
    restarted with a tighter gradient tolerance (at most ``cfg.max_refresh``
    times) before :class:`DualityFailed` is raised.
    """
    mcfg = cfg.minimizer
    rep, runs = minimize_multistart(g, lag, c, mol, mcfg, cfg.starts, cfg.start_amplitude, w0)
    spread = float(np.ptp([r.energy.total for r in runs]))
    refreshes = 0
    while True:
        sol = _recover(g, h, lag, c, mol, rep, regime)
        ok = sol.duality_residual <= cfg.tol_duality and sol.density_mismatch <= cfg.tol_duality
        if ok or refreshes >= cfg.max_refresh:
            break
        refreshes += 1
        mcfg = replace(mcfg, grad_tol=max(mcfg.grad_tol * 0.1, 1e-13))
        log.info("refresh %d: duality %.3e mismatch %.3e", refreshes, sol.duality_residual, sol.density_mismatch)
        rep = minimize_local(g, lag, c, mol, mcfg, rep.pair.w)
    sol.minimizer = {**rep.summary(), "refreshes": refreshes, "multistart_spread": spread}
    if not ok:
        raise DualityFailed(
            f"duality residual {sol.duality_residual:.3e}, density mismatch {sol.density_mismatch:.3e}", sol
        )
    return sol


def _recover(
    g: Grid, h: Hamiltonian, lag: Lagrangian, c: Coupling, mol: Mollifier, rep: MinimizeReport, regime: str
) -> MFGSolution:
    pair = rep.pair
    f_frozen = mollified_coupling(c, mol, pair.m, g)
    erg = solve_ergodic(g, h, f_frozen, u0=rep.u_estimate, lam0=rep.lam_estimate)
    dens = solve_stationary(g, godunov_drift(g, h, erg.u), m_prev=pair.m)
    r_hjb, r_fp = system_residuals(g, h, c, erg.u, erg.lam, pair.m)
    return MFGSolution(
        u=erg.u,
        lam=erg.lam,
        m=pair.m,
        w=pair.w,
        duality_residual=duality_residual(g, h, pair, erg.u),
        system_residual=max(r_hjb, r_fp),
        energy=rep.energy,
        regime=regime,
        epsilon=mol.epsilon,
        hjb_residual=r_hjb,
        fp_residual=r_fp,
        density_mismatch=integrate(g, np.abs(dens.m - pair.m)),
        interior_certified=rep.interior_certified,
    )


def solve(
    g: Grid,
    h: Hamiltonian,
    c: Coupling,
    cfg: SolveConfig | None = None,
    *,
    lag: Lagrangian | None = None,
    n: int | None = None,
    w0=None,
) -> MFGSolution:
    """Run the epsilon ladder, warm-starting each stage, and check the limit system.

    Raises:
        ContinuationDiverged: if sup m increases monotonically by more than
            ``cfg.growth_factor`` along the ladder.
    """
    cfg = cfg or SolveConfig()
    lag = lag or h.lagrangian()
    regime = cfg.regime_override or classify_regime(h.gamma, n or g.dim, c.q).value
    history: list[StageRecord] = []
    sol = None
    for eps in cfg.ladder():
        sol = solve_regularized(g, h, lag, c, Mollifier(eps), cfg, w0=w0, regime=regime)
        w0 = sol.w
        history.append(
            StageRecord(
                epsilon=eps,
                sup_m=float(sol.m.max()),
                lam=sol.lam,
                energy=sol.energy.total,
                lq_norm_q=sol.energy.lq_norm_q,
                duality_residual=sol.duality_residual,
                density_mismatch=sol.density_mismatch,
                refreshes=int(sol.minimizer.get("refreshes", 0)),
                interior_certified=sol.interior_certified,
            )
        )
        sups = [r.sup_m for r in history]
        if len(sups) > 1 and all(b > a for a, b in zip(sups, sups[1:])) and sups[-1] > cfg.growth_factor * sups[0]:
            raise ContinuationDiverged(f"sup m grew from {sups[0]:.3g} to {sups[-1]:.3g}", history)
    sol.history = history
    if sol.epsilon != 0.0:
        # The last stage was mollified: report the unregularized energy and residuals.
        sol.energy = energy(g, FlowPair(sol.m, sol.w), lag, c)
    return sol


def blowup_monitor(history, gamma: float, q: float, n: int) -> tuple[float, list[float]]:
    """sup over stages of sup m, and M^(-q + beta N) ||m||_q^q per stage.

    ``history`` holds records with ``sup_m`` and ``lq_norm_q`` fields (or
    mappings with those keys); beta = (q - 1)(gamma - 1)/gamma.
    """
    if not history:
        raise BadParameter("empty history")
    beta = (q - 1.0) * (gamma - 1.0) / gamma
    expo = -q + beta * n
    if abs(expo) < 1e-12:
        expo = 0.0
    sups, seq = [], []
    for rec in history:
        sup_m = rec["sup_m"] if isinstance(rec, dict) else rec.sup_m
        lq = rec["lq_norm_q"] if isinstance(rec, dict) else rec.lq_norm_q
        sups.append(sup_m)
        seq.append(float(sup_m**expo * lq))
    return float(max(sups)), seq


def critical_gate(ledger: ConstantsLedger, h: Hamiltonian, c: Coupling) -> tuple[bool, dict]:
    """Evaluate the three smallness conditions of the Sobolev-critical case.

    Conditions: C_f below the critical-ball threshold, data size
    C_f alpha_hat^(1/q') + K_f <= delta, and K_H <= 1/(4 C_E C_S).  The
    report names the binding condition: the first violated one, or the one
    with the least slack when all hold.
    """
    q = c.q
    qp = q / (q - 1.0)
    data = c.c_f * ledger.alpha_hat ** (1.0 / qp) + c.k_f
    checks = {
        "cf_critical": (c.c_f, ledger.cf_threshold_critical, c.c_f < ledger.cf_threshold_critical),
        "data_smallness": (data, ledger.delta, data <= ledger.delta),
        "kh_smallness": (h.k_h, ledger.kh_threshold, h.k_h <= ledger.kh_threshold),
    }
    failed = [name for name, (_, _, ok) in checks.items() if not ok]
    if failed:
        binding = failed[0]
    else:
        binding = min(checks, key=lambda k: (checks[k][1] - checks[k][0]) / max(checks[k][1], 1e-300))
    try:
        roots = barrier_levels(1.0, h.gamma, ledger.delta) if ledger.delta > 0 else (0.0, math.nan)
    except NoBarrier:
        roots = (math.nan, math.nan)
    report = {
        "passed": not failed,
        "binding": binding,
        "failed": failed,
        "delta": ledger.delta,
        "gradient_target": ledger.gradient_target,
        "barrier_y1": roots[0],
        "barrier_y2": roots[1],
        "conditions": {k: {"value": v, "bound": b, "ok": ok} for k, (v, b, ok) in checks.items()},
    }
    return not failed, report


# --- quadratic Hamiltonian via the square-root substitution -------------------


def hopf_cole_solve(
    g: Grid,
    c: Coupling,
    *,
    kappa: float = 1.0,
    phi0=None,
    tol: float = 1e-10,
    max_iters: int = 20000,
    tau: float = 0.05,
) -> tuple[np.ndarray, float]:
    """Minimize kappa * int |grad phi|^2 + int F(phi^2) over int phi^2 = 1.

    For H(p) = (c/2)|p|^2 the substitution phi = sqrt(m) (kappa = 2/c)
    turns the MFG system into -kappa lap phi + f(phi^2) phi = lam phi.
    A normalized semi-implicit gradient flow finds a minimizer, and a few
    Newton steps on the (phi, lam) system polish it.

    Returns:
        (m, lam) with m = phi^2.

    Raises:
        NonConvergence: if the residual stays above ``tol``.
    """
    lap = laplacian_matrix(g)
    phi = np.ones(g.size) if phi0 is None else np.abs(check_scalar(g, phi0)).ravel().astype(float)
    vol = g.cell_volume

    def normalize(v):
        return v / np.sqrt(np.sum(v * v) * vol)

    def lam_of(v):
        grad_sq = float(np.sum(gradient(g, v.reshape(g.shape)) ** 2) * vol)
        return kappa * grad_sq + float(np.sum(c.f(v * v).ravel() * v * v) * vol)

    def residual(v, lam):
        return -kappa * (lap @ v) + c.f(v * v).ravel() * v - lam * v

    phi = normalize(phi)
    ident = sp.identity(g.size, format="csc")
    lam = lam_of(phi)
    for _ in range(max_iters):
        rnorm = float(np.abs(residual(phi, lam)).max())
        if rnorm < 1e-6:
            break
        # Implicit step with the coupling frozen and shifted to be nonnegative:
        # its fixed points solve (-kappa lap + f) phi = lam phi exactly.
        fv = c.f(phi * phi).ravel()
        mat = ident + 2.0 * tau * (-kappa * lap + sp.diags(fv - fv.min()))
        phi = normalize(splu(mat.tocsc()).solve(phi))
        lam = lam_of(phi)
    for _ in range(50):
        res = residual(phi, lam)
        rnorm = float(np.abs(res).max())
        if rnorm < tol:
            return (phi * phi).reshape(g.shape), float(lam)
        diag = c.f(phi * phi).ravel() + 2.0 * c.df(phi * phi).ravel() * phi * phi - lam
        jac = sp.bmat(
            [
                [-kappa * lap + sp.diags(diag), sp.csr_matrix(-phi[:, None])],
                [sp.csr_matrix(2.0 * vol * phi[None, :]), None],
            ],
            format="csc",
        )
        cons = float(np.sum(phi * phi) * vol) - 1.0
        delta = splu(jac).solve(-np.append(res, cons))
        phi, lam = phi + delta[:-1], lam + delta[-1]
    raise NonConvergence(f"square-root solver residual {rnorm:.3e} above {tol:.1e}")


# --- constructive energy experiments -------------------------------------------


def multiplicity_probe(
    g: Grid, lag: Lagrangian, c: Coupling, phi, eps_list, m_floor: float = 1e-10
) -> list[dict]:
    """Energy of (1 + eps phi, grad(1 + eps phi)) against F(1) for each eps."""
    phi = check_scalar(g, phi)
    if abs(integrate(g, phi)) > 1e-10:
        raise BadParameter("phi must have zero integral")
    f1 = float(np.sum(c.F(np.ones(g.shape))) * g.cell_volume)
    rows = []
    for eps in eps_list:
        m = 1.0 / g.volume + eps * phi
        if m.min() < m_floor:
            raise InfeasibleEps(f"eps={eps} gives min density {m.min():.3e}")
        rep = energy(g, FlowPair(m, gradient(g, m)), lag, c)
        rows.append(
            {
                "eps": float(eps),
                "kinetic": rep.kinetic,
                "potential": rep.potential,
                "energy": rep.total,
                "trivial_energy": f1,
                "gap": rep.total - f1,
                "below_trivial": bool(rep.total < f1),
            }
        )
    return rows


def bump_profile(r: np.ndarray, power: int = 8) -> np.ndarray:
    """cos(pi r / 2)**power on the unit ball, zero outside."""
    return np.where(r < 1.0, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** power, 0.0)


def concentrated_pair(
    g: Grid, lam: float, x0=None, power: int = 8, background: float = 1e-12
) -> FlowPair:
    """lam^N m0(lam (x - x0)) with unit mass, w = grad m, on a faint uniform background.

    The background keeps every cell strictly positive so the upwind kinetic
    term stays finite; it is far below the discretization error.
    """
    x0 = tuple(0.5 * L for L in g.lengths) if x0 is None else tuple(x0)
    radius = 1.0 / lam
    for axis, centre in enumerate(x0):
        if centre - radius < 0.0 or centre + radius > g.lengths[axis]:
            raise BumpEscapesDomain(f"support of radius {radius:.4g} around {x0} leaves the domain")
    coords = g.mesh()
    r = lam * np.sqrt(sum((x - c0) ** 2 for x, c0 in zip(coords, x0)))
    bump = bump_profile(r, power)
    total = integrate(g, bump)
    if total <= 0:
        raise BumpEscapesDomain(f"bump at scale {lam} is not resolved by the grid")
    m = (1.0 - background) * bump / total + background / g.volume
    return FlowPair(m, gradient(g, m))


def unboundedness_sweep(
    g: Grid,
    lag: Lagrangian,
    c: Coupling,
    lambdas,
    *,
    x0=None,
    power: int = 8,
    alpha: float = math.inf,
) -> list[dict]:
    """Energy of concentrating pairs (m_lam, grad m_lam) along the scalings ``lambdas``."""
    rows = []
    for lam in lambdas:
        pair = concentrated_pair(g, float(lam), x0, power)
        rep = energy(g, pair, lag, c)
        coupling_part = rep.potential - c.k_f * integrate(g, pair.m if c.b_weight is None else pair.m * c.b_weight)
        rows.append(
            {
                "lambda": float(lam),
                "kinetic": rep.kinetic,
                "potential": rep.potential,
                "coupling_term": coupling_part,
                "energy": rep.total,
                "lq_norm_q": rep.lq_norm_q,
                "in_ball": bool(rep.lq_norm_q <= alpha),
            }
        )
    return rows


def sweep_slopes(rows: list[dict]) -> tuple[float, float]:
    """Log-log slopes of the kinetic term and of |coupling term| against lambda."""
    lam = np.log([r["lambda"] for r in rows])
    kin = np.log([r["kinetic"] for r in rows])
    cpl = np.log([abs(r["coupling_term"]) for r in rows])
    return float(np.polyfit(lam, kin, 1)[0]), float(np.polyfit(lam, cpl, 1)[0])
