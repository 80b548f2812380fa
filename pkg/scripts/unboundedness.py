"""Energy of concentrating bumps below and above the mass-critical exponent (1D, gamma = 2)."""

import argparse

import numpy as np

from varmfg import Coupling, Grid, Hamiltonian, mass_critical
from varmfg.mfg import sweep_slopes, unboundedness_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=20000)
    ap.add_argument("--c-f", type=float, default=10.0)
    ap.add_argument("--q", type=float, nargs="+", default=[2.5, 3.5])
    args = ap.parse_args()
    g = Grid(1, args.cells)
    lag = Hamiltonian(2.0).lagrangian()
    lambdas = np.geomspace(4.0, 100.0, 12)
    print(f"q_bar = {mass_critical(2.0, 1):g}")
    for q in args.q:
        rows = unboundedness_sweep(g, lag, Coupling(args.c_f, q), lambdas)
        kin, cpl = sweep_slopes(rows)
        print(f"q={q}: slopes kinetic {kin:.4f} (2), coupling {cpl:.4f} ({q - 1:g})")
        for r in rows:
            print(f"  lambda {r['lambda']:8.3f}  energy {r['energy']:14.4f}")


if __name__ == "__main__":
    main()
