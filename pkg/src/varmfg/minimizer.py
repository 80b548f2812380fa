"""Minimization of the regularized energy over the discrete constraint set.

The linear constraint lap m = div w and the unit mass are eliminated with
the zero-mean Green operator: every flux ``w`` defines the density

    m(w) = 1/|Omega| + G(div w),

so the objective phi(w) = E_eps(m(w), w) is minimized over ``w`` alone.
The gradient of phi in the cell-volume inner product is

    grad phi = dK/dw - grad G(dK/dm + f_eps[m]),

and at a stationary point u = -G(dK/dm + f_eps[m]) solves the upwind
ergodic HJB equation with lam = mean(dK/dm + f_eps[m]).

Descent uses limited-memory BFGS directions with a backtracking line search
that rejects steps leaving m >= m_floor (and, in ``reject`` mode, the ball
||m||_q^q <= alpha).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyReport, FlowPair, energy_regularized, upwind_parts, upwind_parts_adjoint
from .errors import BadParameter, LineSearchStalled
from .grid import Grid, check_vector, divergence, gradient, green_apply, integrate, mean, poisson_neumann_zero_mean
from .model import Coupling, Lagrangian, Mollifier

log = logging.getLogger(__name__)

BALL_MODES = ("reject", "penalty")


@dataclass(frozen=True)
class MinimizerConfig:
    alpha: float = math.inf
    m_floor: float = 1e-10
    step0: float = 1.0
    max_iters: int = 5000
    grad_tol: float = 1e-7
    ball_mode: str = "reject"
    seed: int = 0
    memory: int = 12
    penalty: float = 1e4
    min_step: float = 1e-14
    trace: bool = False

    def __post_init__(self) -> None:
        if not self.alpha >= 1:
            raise BadParameter(f"alpha must be at least 1, got {self.alpha}")
        if self.ball_mode not in BALL_MODES:
            raise BadParameter(f"ball_mode must be one of {BALL_MODES}")
        for name in ("m_floor", "step0", "grad_tol", "penalty", "min_step"):
            if not getattr(self, name) > 0:
                raise BadParameter(f"{name} must be positive")
        if self.max_iters < 0 or self.memory < 1:
            raise BadParameter("max_iters must be >= 0 and memory >= 1")


@dataclass
class MinimizeReport:
    pair: FlowPair
    energy: EnergyReport
    ball_margin: float
    grad_norm_final: float
    iterations: int
    interior_certified: bool
    converged: bool
    u_estimate: np.ndarray
    lam_estimate: float
    trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "energy": self.energy.total,
            "ball_margin": self.ball_margin,
            "grad_norm_final": self.grad_norm_final,
            "iterations": self.iterations,
            "interior_certified": self.interior_certified,
            "converged": self.converged,
        }


def reduced_density(g: Grid, w) -> np.ndarray:
    """m = 1/|Omega| + G(div w): unit mass and lap m = div w by construction."""
    w = check_vector(g, w)
    return 1.0 / g.volume + poisson_neumann_zero_mean(g, divergence(g, w))


@dataclass
class _Eval:
    phi: float
    grad: np.ndarray | None = None
    m: np.ndarray | None = None
    lq: float = math.nan
    u: np.ndarray | None = None
    lam: float = math.nan


class ReducedObjective:
    """phi(w) = E_eps(m(w), w) with its gradient and the implied (u, lam)."""

    def __init__(self, g: Grid, lag: Lagrangian, c: Coupling, mol: Mollifier, cfg: MinimizerConfig):
        self.g, self.lag, self.c, self.mol, self.cfg = g, lag, c, mol, cfg
        self.mask = g.interior_faces()

    def evaluate(self, w: np.ndarray, need_grad: bool = True) -> _Eval:
        g, lag, c, cfg = self.g, self.lag, self.c, self.cfg
        m = reduced_density(g, w)
        if m.min() < cfg.m_floor:
            return _Eval(math.inf, m=m)
        lq = integrate(g, m**c.q)
        if cfg.ball_mode == "reject" and lq > cfg.alpha:
            return _Eval(math.inf, m=m, lq=lq)
        gc, a = lag.gamma_conj, lag.coef
        parts = upwind_parts(g, w)
        r = np.sqrt(np.sum(parts * parts, axis=0))
        kin = a * r**gc / m ** (gc - 1.0)
        mm = self.mol.apply(g, m)
        phi = float(np.sum(kin + c.F(mm)) * g.cell_volume)
        excess = max(lq - cfg.alpha, 0.0) if cfg.ball_mode == "penalty" else 0.0
        phi += cfg.penalty * excess**2
        if not need_grad:
            return _Eval(phi, m=m, lq=lq)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, a * gc * r ** (gc - 2.0) / m ** (gc - 1.0), 0.0)
        dk_dw = upwind_parts_adjoint(g, w, scale * parts)
        dphi_dm = -(gc - 1.0) * kin / m + self.mol.apply(g, c.f(mm))
        if excess > 0:
            dphi_dm = dphi_dm + 2.0 * cfg.penalty * excess * c.q * m ** (c.q - 1.0)
        u = -green_apply(g, dphi_dm)
        grad = (dk_dw + gradient(g, u)) * self.mask
        return _Eval(phi, grad, m, lq, u, mean(g, dphi_dm))

    def grad_norm(self, grad: np.ndarray) -> float:
        return float(np.sqrt(np.sum(grad * grad) * self.g.cell_volume))


def _report(obj: ReducedObjective, w, ev: _Eval, iters: int, converged: bool, trace: list) -> MinimizeReport:
    g, cfg = obj.g, obj.cfg
    pair = FlowPair(ev.m, w.copy())
    rep = energy_regularized(g, pair, obj.lag, obj.c, obj.mol, cfg.m_floor)
    margin = cfg.alpha - rep.lq_norm_q
    certified = bool(margin > 1e-6 * cfg.alpha) if math.isfinite(cfg.alpha) else True
    return MinimizeReport(
        pair, rep, float(margin), obj.grad_norm(ev.grad), iters, certified, converged, ev.u, ev.lam, trace
    )


def minimize_local(
    g: Grid,
    lag: Lagrangian,
    c: Coupling,
    mol: Mollifier,
    cfg: MinimizerConfig,
    w0=None,
) -> MinimizeReport:
    """Descend phi(w) from ``w0`` until the gradient norm drops below ``grad_tol``.

    Raises:
        BadParameter: if ``w0`` is infeasible.
        LineSearchStalled: if no acceptable step longer than ``min_step`` exists;
            the exception carries the report at the last accepted iterate.
    """
    obj = ReducedObjective(g, lag, c, mol, cfg)
    w = g.zero_vector() if w0 is None else check_vector(g, w0) * obj.mask
    ev = obj.evaluate(w)
    if not math.isfinite(ev.phi):
        raise BadParameter("initial flux gives a density below m_floor or outside the ball")
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    trace: list = []
    it = 0
    gnorm = obj.grad_norm(ev.grad)
    while True:
        if cfg.trace:
            trace.append((it, ev.phi, cfg.alpha - ev.lq, gnorm))
        if gnorm <= cfg.grad_tol:
            return _report(obj, w, ev, it, True, trace)
        if it >= cfg.max_iters:
            return _report(obj, w, ev, it, False, trace)
        direction = _two_loop(ev.grad, s_hist, y_hist)
        step = _line_search(obj, w, ev, direction, cfg.step0 if s_hist else min(cfg.step0, 1.0 / max(gnorm, 1e-300)))
        if step is None and s_hist:
            s_hist.clear()
            y_hist.clear()
            direction = -ev.grad
            step = _line_search(obj, w, ev, direction, min(cfg.step0, 1.0 / gnorm))
        if step is None:
            raise LineSearchStalled(
                f"no acceptable step at iteration {it} (grad norm {gnorm:.3e})",
                _report(obj, w, ev, it, False, trace),
            )
        t, ev_new = step
        s = t * direction
        y = ev_new.grad - ev.grad
        if float(np.sum(s * y)) > 1e-14 * float(np.sqrt(np.sum(s * s) * np.sum(y * y))):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        w = w + s
        ev = ev_new
        gnorm = obj.grad_norm(ev.grad)
        it += 1
        if it % 200 == 0:
            log.debug("iter %d: phi %.12g grad %.3e", it, ev.phi, gnorm)


def _two_loop(grad: np.ndarray, s_hist: list, y_hist: list) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(np.sum(y * s))
        a = rho * float(np.sum(s * q))
        alphas.append((a, rho, s, y))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= float(np.sum(s * y)) / float(np.sum(y * y))
    for a, rho, s, y in reversed(alphas):
        b = rho * float(np.sum(y * q))
        q += (a - b) * s
    return -q


def _line_search(obj: ReducedObjective, w, ev: _Eval, d: np.ndarray, t0: float):
    """Backtracking with Armijo or approximate-Wolfe acceptance; None if it fails."""
    slope = float(np.sum(ev.grad * d))
    if not slope < 0:
        return None
    slack = 1e-10 * max(1.0, abs(ev.phi))
    t = t0
    while t >= obj.cfg.min_step:
        trial = obj.evaluate(w + t * d)
        if math.isfinite(trial.phi):
            if trial.phi <= ev.phi + 1e-4 * t * slope:
                return t, trial
            new_slope = float(np.sum(trial.grad * d))
            if trial.phi <= ev.phi + slack and 0.9 * slope <= new_slope <= -0.8 * slope:
                return t, trial
        t *= 0.5
    return None


def perturbed_start(g: Grid, rng: np.random.Generator, amplitude: float, w0=None) -> np.ndarray:
    """w0 plus the gradient of a random smooth field of sup-norm ``amplitude``.

    The density of the perturbation alone is 1 + s with |s| <= amplitude.
    """
    from .energy import random_smooth_field

    base = g.zero_vector() if w0 is None else check_vector(g, w0)
    return base + gradient(g, amplitude * random_smooth_field(g, rng))


def minimize_multistart(
    g: Grid,
    lag: Lagrangian,
    c: Coupling,
    mol: Mollifier,
    cfg: MinimizerConfig,
    starts: int,
    amplitude: float = 0.5,
    w0=None,
) -> tuple[MinimizeReport, list[MinimizeReport]]:
    """Run from ``w0`` and ``starts - 1`` seeded perturbations; return the best and all runs."""
    rng = np.random.default_rng(cfg.seed)
    obj = ReducedObjective(g, lag, c, mol, cfg)
    base = g.zero_vector() if w0 is None else check_vector(g, w0)
    runs = [minimize_local(g, lag, c, mol, cfg, base)]
    for _ in range(starts - 1):
        kick = perturbed_start(g, rng, amplitude)
        # Shrink the kick until the start is feasible (matters around peaked w0).
        for _ in range(30):
            if math.isfinite(obj.evaluate(base + kick).phi):
                break
            kick = 0.5 * kick
        else:
            continue
        runs.append(minimize_local(g, lag, c, mol, cfg, base + kick))
    # Ties within round-off keep the earliest run, i.e. the (warm) start itself.
    best = runs[0]
    for run in runs[1:]:
        if run.energy.total < best.energy.total - 1e-12 * (1.0 + abs(best.energy.total)):
            best = run
    return best, runs


def gradient_check(
    g: Grid,
    lag: Lagrangian,
    c: Coupling,
    mol: Mollifier,
    w,
    *,
    directions: int = 10,
    step: float = 1e-6,
    seed: int = 0,
    cfg: MinimizerConfig | None = None,
) -> float:
    """Max relative gap between analytic and central-difference directional derivatives."""
    cfg = cfg or MinimizerConfig()
    obj = ReducedObjective(g, lag, c, mol, replace(cfg, ball_mode="penalty", alpha=math.inf))
    w = check_vector(g, w) * obj.mask
    base = obj.evaluate(w)
    if not math.isfinite(base.phi):
        raise BadParameter("gradient_check needs a feasible flux")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(directions):
        d = rng.normal(size=w.shape) * obj.mask
        d /= obj.grad_norm(d)
        analytic = float(np.sum(base.grad * d) * g.cell_volume)
        plus = obj.evaluate(w + step * d, need_grad=False).phi
        minus = obj.evaluate(w - step * d, need_grad=False).phi
        numeric = (plus - minus) / (2.0 * step)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6))
    return worst
