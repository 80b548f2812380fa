"""Variational solver for stationary ergodic mean field games with Neumann walls.

The pipeline minimizes a convex kinetic energy plus a (possibly
aggregative) coupling potential over density-flux pairs on a staggered
grid, then recovers the value function and the ergodic constant from the
minimizer and checks the optimality system.
"""

__version__ = "0.1.0"

from .errors import MFGError
from .exponents import ConstantsLedger, Regime, build_ledger, classify_regime, mass_critical, sobolev_critical
from .grid import Grid
from .mfg import MFGSolution, SolveConfig, hopf_cole_solve, solve
from .minimizer import MinimizerConfig
from .model import Coupling, Hamiltonian, Lagrangian, Mollifier

__all__ = [
    "ConstantsLedger",
    "Coupling",
    "Grid",
    "Hamiltonian",
    "Lagrangian",
    "MFGError",
    "MFGSolution",
    "MinimizerConfig",
    "Mollifier",
    "Regime",
    "SolveConfig",
    "__version__",
    "build_ledger",
    "classify_regime",
    "hopf_cole_solve",
    "mass_critical",
    "sobolev_critical",
    "solve",
]
