"""Energy of 1 + eps*cos(2 pi x) against the trivial energy, then a full solve.

With gamma' > 2 the kinetic cost grows like eps^gamma' while the aggregative
potential gains like eps^2, so small amplitudes sit below F(1).
"""

import argparse

import numpy as np

from varmfg import Coupling, Grid, Hamiltonian, solve
from varmfg.mfg import multiplicity_probe


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.5)
    ap.add_argument("--c-f", type=float, default=1.0)
    ap.add_argument("--cells", type=int, default=512)
    args = ap.parse_args()
    h, c = Hamiltonian(args.gamma), Coupling(args.c_f, 2.0)
    g = Grid(1, args.cells)
    rows = multiplicity_probe(g, h.lagrangian(), c, np.cos(2 * np.pi * g.centers()), np.geomspace(1e-4, 0.3, 25))
    print(f"{'eps':>10} {'kinetic':>12} {'gap':>12}")
    for r in rows:
        print(f"{r['eps']:10.3e} {r['kinetic']:12.4e} {r['gap']:12.4e}")
    sol = solve(Grid(1, 128), h, c)
    print(f"solve: lambda {sol.lam:.6f}, E - F(1) {sol.energy.total + args.c_f / 2:.3e}, osc m {np.ptp(sol.m):.4f}")


if __name__ == "__main__":
    main()
