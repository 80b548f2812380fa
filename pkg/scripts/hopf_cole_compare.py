"""Variational solve against the square-root eigenvalue solver for H = |p|^2.

Below C_f = pi^2/2 the uniform state is the minimizer; above it both
solvers find a bump and lambda differs by the O(h) upwind error.
"""

import argparse

import numpy as np

from varmfg import Coupling, Grid, Hamiltonian, hopf_cole_solve, solve
from varmfg.grid import integrate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c-f", type=float, nargs="+", default=[2.0, 5.5, 6.0, 8.0])
    ap.add_argument("--cells", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args()
    h = Hamiltonian(2.0, 2.0)
    print(f"{'c_f':>6} {'cells':>6} {'L1 gap':>10} {'lam solve':>12} {'lam sqrt':>12}")
    for c_f in args.c_f:
        c = Coupling(c_f, 2.0)
        for n in args.cells:
            g = Grid(1, n)
            sol = solve(g, h, c)
            m, lam = hopf_cole_solve(g, c, phi0=np.sqrt(1 + 0.3 * np.cos(np.pi * g.centers())))
            print(f"{c_f:6.2f} {n:6d} {integrate(g, np.abs(sol.m - m)):10.3e} {sol.lam:12.6f} {lam:12.6f}")


if __name__ == "__main__":
    main()
