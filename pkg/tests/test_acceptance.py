"""Acceptance suite: fifteen end-to-end criteria with their tolerances and time budgets.

Each criterion is a function returning (passed, detail).  Under pytest every
criterion is one test and a PASS/FAIL line per criterion is printed in the
terminal summary; ``python3 tests/test_acceptance.py`` prints the same lines.
"""

from __future__ import annotations

import itertools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from varmfg.cli import main as cli_main
from varmfg.energy import (
    energy,
    estimate_cq,
    estimate_embedding_constants,
    fp_constraint_residual,
    random_pair,
    trivial_pair,
)
from varmfg.exponents import (
    alpha_bar,
    build_ledger,
    cf_threshold_critical,
    k_dprime,
    k_prime,
    mass_critical,
    sobolev_critical,
)
from varmfg.fp import fp_flux_pair, solve_stationary
from varmfg.grid import Grid, integrate, mean
from varmfg.hjb import barrier_levels, solve_ergodic, solve_linear_shift
from varmfg.mfg import (
    SolveConfig,
    blowup_monitor,
    critical_gate,
    hopf_cole_solve,
    multiplicity_probe,
    solve,
    sweep_slopes,
    trivial_system_residual,
    unboundedness_sweep,
)
from varmfg.minimizer import MinimizerConfig, gradient_check, minimize_multistart
from varmfg.model import Coupling, Hamiltonian, Mollifier

RESULTS: list[str] = []


def _order(ns, errs) -> float:
    return float(-np.polyfit(np.log(ns), np.log(errs), 1)[0])


def criterion_01():
    g = Grid(1, 128)
    worst_res = worst_energy = 0.0
    for gamma, q, c_f, k_f, sign in itertools.product((1.5, 2.0, 3.0), (1.5, 2.0, 3.5), (0.0, 0.7, 5.0), (0.0, 0.3), (-1, 1)):
        h, c = Hamiltonian(gamma), Coupling(c_f, q, k_f, sign)
        worst_res = max(worst_res, trivial_system_residual(g, h, c))
        rep = energy(g, trivial_pair(g), h.lagrangian(), c)
        worst_energy = max(worst_energy, abs(rep.total - (sign * c_f / q + k_f)))
    ok = worst_res <= 1e-12 and worst_energy <= 1e-12
    return ok, f"max residual {worst_res:.2e}, max |E - F(1)| {worst_energy:.2e}"


def criterion_02():
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(20):
        g = Grid(1 + i % 2, 64 if i % 2 == 0 else 24)
        f = rng.normal(size=g.shape) * rng.uniform(0.1, 10.0)
        sol = solve_ergodic(g, None, f)
        worst = max(worst, abs(sol.lam - mean(g, f)), abs(solve_linear_shift(g, f).lam - float(np.mean(f))))
    return worst <= 1e-12, f"max |lam - mean f| {worst:.2e}"


def _manufactured(dim: int, n: int, gamma: float):
    g = Grid(dim, n)
    xs = g.mesh()
    amp, lam = 0.5, 0.3
    cosines = [np.cos(np.pi * x) for x in xs]
    u = amp * np.prod(cosines, axis=0)
    grad = []
    for k in range(dim):
        part = -amp * np.pi * np.sin(np.pi * xs[k])
        for j in range(dim):
            if j != k:
                part = part * cosines[j]
        grad.append(part)
    h = Hamiltonian(gamma)
    f = dim * np.pi**2 * u + h.value(np.array(grad)) + lam
    sol = solve_ergodic(g, h, f)
    return float(np.abs(sol.u - (u - mean(g, u))).max()), abs(sol.lam - lam)


def criterion_03():
    ok, notes = True, []
    for dim, gamma in itertools.product((1, 2), (1.5, 2.0, 3.0)):
        errs, lam_errs = zip(*(_manufactured(dim, n, gamma) for n in (32, 64, 128)))
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        good = all(1.6 <= r <= 2.4 for r in ratios) and lam_errs[-1] < 1e-2
        ok &= good
        notes.append(f"{dim}D g={gamma}: ratios {ratios[0]:.2f},{ratios[1]:.2f} lam err {lam_errs[-1]:.1e}")
    return ok, "; ".join(notes)


def criterion_04():
    ns = (32, 64, 128, 256)
    ok, notes = True, []
    cases = {
        "const drift 4": (lambda xf: np.full_like(xf, 4.0), lambda x: 4.0 * np.exp(-4.0 * x) / (1.0 - np.exp(-4.0))),
        "gibbs": (
            lambda xf: -4.0 * np.pi * np.sin(2.0 * np.pi * xf) + 1.0,
            lambda x: np.exp(-(2.0 * np.cos(2.0 * np.pi * x) + x)),
        ),
    }
    for name, (drift, exact) in cases.items():
        errs = []
        for n in ns:
            g = Grid(1, n)
            sol = solve_stationary(g, drift(g.face_mesh(0)[0])[None])
            ref = exact(g.centers())
            ref = ref / integrate(g, ref)
            errs.append(integrate(g, np.abs(sol.m - ref)))
            mass_err = abs(integrate(g, sol.m) - 1.0)
            ok &= mass_err <= 1e-10 and sol.min_value > 0
        order = _order(ns, errs)
        ok &= order >= 0.9
        notes.append(f"{name}: order {order:.3f}")
    return ok, "; ".join(notes)


def criterion_05():
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(10):
        g = Grid(1, 64) if i % 2 == 0 else Grid(2, 24)
        b = rng.normal(size=(g.dim, *g.shape)) * rng.uniform(0.5, 8.0)
        sol = solve_stationary(g, b)
        worst = max(worst, fp_constraint_residual(g, fp_flux_pair(g, sol, b)))
    return worst <= 1e-9, f"max residual {worst:.2e}"


def criterion_06():
    rng = np.random.default_rng(6)
    worst = 0.0
    lag = Hamiltonian(1.5).lagrangian()
    c = Coupling(1.0, 2.0, 0.2, -1)
    for g in (Grid(1, 64), Grid(2, 32)):
        for i in range(10):
            pair = random_pair(g, rng, rng.uniform(0.1, 0.8), solenoidal=0.5 if g.dim == 2 else 0.0)
            mol = Mollifier(0.05 if i % 2 else 0.0)
            worst = max(worst, gradient_check(g, lag, c, mol, pair.w, seed=i))
    return worst <= 1e-5, f"max relative error {worst:.2e}"


def criterion_07():
    g = Grid(1, 64)
    h, c = Hamiltonian(2.0), Coupling(1.0, 2.0, 0.0, 1)
    f1 = c.c_f / c.q
    worst_l1 = worst_e = 0.0
    for seed in range(5):
        cfg = MinimizerConfig(seed=seed, grad_tol=1e-9)
        _, runs = minimize_multistart(g, h.lagrangian(), c, Mollifier(0.0), cfg, starts=2, amplitude=0.8)
        run = runs[-1]
        worst_l1 = max(worst_l1, integrate(g, np.abs(run.pair.m - 1.0)))
        worst_e = max(worst_e, abs(run.energy.total - f1))
    return worst_l1 <= 1e-4 and worst_e <= 1e-8, f"max L1 {worst_l1:.2e}, max |E - F(1)| {worst_e:.2e}"


def criterion_08():
    h, c = Hamiltonian(1.5), Coupling(1.0, 2.0, 0.0, -1)
    lag = h.lagrangian()
    g = Grid(1, 512)
    rows = multiplicity_probe(g, lag, c, np.cos(2.0 * np.pi * g.centers()), np.geomspace(1e-4, 0.3, 80))
    best = min(rows, key=lambda r: r["gap"])
    sol = solve(Grid(1, 128), h, c)
    f1 = -c.c_f / c.q
    nontrivial = float(np.ptp(sol.m)) > 1e-3
    ok = best["gap"] < -1e-6 and nontrivial and sol.energy.total < f1
    return ok, (
        f"probe gap {best['gap']:.3e} at eps {best['eps']:.3g}; solve E - F(1) {sol.energy.total - f1:.3e}, "
        f"osc m {np.ptp(sol.m):.3f}"
    )


def criterion_09():
    g = Grid(1, 20000)
    lag = Hamiltonian(2.0).lagrangian()
    lambdas = np.geomspace(4.0, 100.0, 12)
    below = unboundedness_sweep(g, lag, Coupling(10.0, 2.5, 0.0, -1), lambdas)
    above = unboundedness_sweep(g, lag, Coupling(10.0, 3.5, 0.0, -1), lambdas)
    e_below = [r["energy"] for r in below]
    bounded = min(e_below) >= e_below[0] - 1e-9
    drop = above[0]["energy"] - above[-1]["energy"]
    ok = bounded and drop > 1e3
    notes = [f"q=2.5 min E {min(e_below):.3g}", f"q=3.5 drop {drop:.3g}"]
    for q, rows in ((2.5, below), (3.5, above)):
        kin, cpl = sweep_slopes(rows)
        good = abs(kin - 2.0) <= 0.02 * 2.0 and abs(cpl - (q - 1.0)) <= 0.02 * (q - 1.0)
        ok &= good
        notes.append(f"q={q} slopes {kin:.4f}/{cpl:.4f}")
    return ok, "; ".join(notes)


def criterion_10():
    table = {1: (3.0, math.inf), 2: (2.0, math.inf), 3: (5 / 3, 3.0), 4: (3 / 2, 2.0)}
    got = {n: (mass_critical(2.0, n), sobolev_critical(2.0, n)) for n in table}
    return got == table, f"{got}"


def criterion_11():
    a_hat, thr = cf_threshold_critical(1.0, 1.0, 2.0, 0.0)
    vals = {
        "K'": (k_prime(1.0, 1.0, 2.0, 0.0), 2.5),
        "K''": (k_dprime(1.0, 0.0), 2.0),
        "alpha_hat": (a_hat, 9.0),
        "cf_critical": (thr, 0.2),
        "alpha_bar": (alpha_bar(1.0, 0.5, 1.0, 2.0), 4.0),
    }
    ok = all(abs(v - ref) <= 1e-12 * max(1.0, ref) for v, ref in vals.values())
    return ok, ", ".join(f"{k}={v:g}" for k, (v, _) in vals.items())


def criterion_12():
    g = Grid(1, 128)
    h, c = Hamiltonian(2.0, 2.0), Coupling(2.0, 2.0, 0.0, -1)
    sol = solve(g, h, c)
    phi0 = np.sqrt(1.0 + 0.4 * np.cos(np.pi * g.centers()))
    m_hc, lam_hc = hopf_cole_solve(g, c, kappa=2.0 / h.coef, phi0=phi0)
    l1 = integrate(g, np.abs(sol.m - m_hc))
    dlam = abs(sol.lam - lam_hc)
    return l1 <= 5e-2 and dlam <= 1e-2, f"L1 gap {l1:.2e}, lambda gap {dlam:.2e}"


def criterion_13():
    y1, y2 = barrier_levels(1.0, 2.0, 0.1)
    exact = ((1 - math.sqrt(0.6)) / 2, (1 + math.sqrt(0.6)) / 2)
    lows = [barrier_levels(1.0, 2.0, d)[0] for d in (0.1, 0.05, 0.01)]
    ok = abs(y1 - 0.1127) <= 1e-3 and abs(y2 - 0.8873) <= 1e-3 and abs(y1 - exact[0]) < 1e-12
    ok &= all(b < a for a, b in zip(lows, lows[1:]))
    return ok, f"roots ({y1:.6f}, {y2:.6f}); y1 along delta {[round(v, 6) for v in lows]}"


def criterion_14():
    g = Grid(2, 24)
    n, gamma, q = 4, 2.0, 2.0
    b = np.cos(np.pi * g.mesh()[0]) * np.cos(np.pi * g.mesh()[1])
    h = Hamiltonian(gamma, k_h=1e-3)
    c = Coupling(1e-2, q, 1e-3, -1, b_weight=b)
    c_e, c_s, _, _ = estimate_embedding_constants(g, n, gamma, samples=100)
    c_q = estimate_cq(g, 100, q=q, gamma=gamma)
    ledger = build_ledger(h, c, n, c_q, c_e, c_s)
    passed, _ = critical_gate(ledger, h, c)
    sol = solve(g, h, c, SolveConfig(minimizer=MinimizerConfig(alpha=ledger.alpha, grad_tol=1e-8)), n=n)
    sup_m, monitor = blowup_monitor(sol.history, gamma, q, n)
    bounded = math.isfinite(sup_m) and max(monitor) <= 10.0 * min(monitor)
    bad_h = Hamiltonian(gamma, k_h=2.0 * ledger.kh_threshold)
    bad_ok, report = critical_gate(ledger, bad_h, c)
    ok = passed and bounded and sol.system_residual <= 1e-5 and not bad_ok and report["binding"] == "kh_smallness"
    return ok, (
        f"gate {passed}, residual {sol.system_residual:.2e}, sup m {sup_m:.4f}, "
        f"violated gate binding={report['binding']}"
    )


def criterion_15():
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        codes = [cli_main(["selftest", "--out", str(d), "--seed", "7"]) for d in dirs]
        names = sorted(p.name for p in dirs[0].iterdir())
        same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
            (dirs[0] / nm).read_bytes() == (dirs[1] / nm).read_bytes() for nm in names
        )
        csvs = [nm for nm in names if nm.endswith(".csv")]
    ok = codes == [0, 0] and same and "manifest.json" in names and len(csvs) >= 2
    return ok, f"exit codes {codes}, {len(names)} files identical={same}"


CRITERIA = [
    (1, "trivial solution", criterion_01, 1.0),
    (2, "linear lambda identity", criterion_02, 1.0),
    (3, "manufactured HJB", criterion_03, 30.0),
    (4, "Fokker-Planck oracles", criterion_04, 10.0),
    (5, "duality at machine level", criterion_05, 5.0),
    (6, "gradient correctness", criterion_06, 30.0),
    (7, "uniqueness regime", criterion_07, 60.0),
    (8, "multiplicity inequality", criterion_08, 120.0),
    (9, "mass-critical dichotomy", criterion_09, 30.0),
    (10, "exponent tables", criterion_10, 1.0),
    (11, "constants ledger", criterion_11, 1.0),
    (12, "square-root cross-validation", criterion_12, 120.0),
    (13, "barrier roots", criterion_13, 1.0),
    (14, "critical gate", criterion_14, 300.0),
    (15, "determinism", criterion_15, 60.0),
]


def run_criterion(number, name, fn, budget) -> tuple[bool, str]:
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < budget
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'} {name}: {detail} [{elapsed:.2f}s / {budget:g}s]"
    RESULTS.append(line)
    return ok, line


@pytest.mark.parametrize("number,name,fn,budget", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, name, fn, budget):
    ok, line = run_criterion(number, name, fn, budget)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for spec in CRITERIA:
        ok, line = run_criterion(*spec)
        print(line, flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
