"""Sobolev-critical run (declared N = 4) on a coarse 2D grid with measured constants."""

import json

import numpy as np

from varmfg import Coupling, Grid, Hamiltonian, MinimizerConfig, SolveConfig, build_ledger, solve
from varmfg.energy import estimate_cq, estimate_embedding_constants
from varmfg.mfg import blowup_monitor, critical_gate


def main() -> None:
    g, n = Grid(2, 24), 4
    x, y = g.mesh()
    h = Hamiltonian(2.0, k_h=1e-3)
    c = Coupling(1e-2, 2.0, 1e-3, b_weight=np.cos(np.pi * x) * np.cos(np.pi * y))
    c_e, c_s, p, p_star = estimate_embedding_constants(g, n, 2.0)
    ledger = build_ledger(h, c, n, estimate_cq(g, 200, q=2.0), c_e, c_s)
    ok, report = critical_gate(ledger, h, c)
    print(json.dumps({"C_E": c_e, "C_S": c_s, "p": p, "p*": p_star, "gate": report}, indent=2))
    if ok:
        sol = solve(g, h, c, SolveConfig(minimizer=MinimizerConfig(alpha=ledger.alpha)), n=n)
        print("system residual", sol.system_residual, "monitor", blowup_monitor(sol.history, 2.0, 2.0, n))
    bad = Hamiltonian(2.0, k_h=2 * ledger.kh_threshold)
    print("violated K_H ->", critical_gate(ledger, bad, c)[1]["binding"])


if __name__ == "__main__":
    main()
