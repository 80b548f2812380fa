"""Power-model Hamiltonian, its Lagrangian, the local coupling and the mollifier.

Vectors are stored with their components along axis 0, so a single vector
is a 1-D array and a field of vectors has shape ``(k, *field_shape)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import BadParameter, NegativeDensity
from .grid import Grid, check_scalar

INFEASIBLE = math.inf
"""Sentinel returned for infeasible kinetic or potential values."""


def _norm(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        return np.abs(p)
    return np.sqrt(np.sum(p * p, axis=0))


def conjugate_exponent(gamma: float) -> float:
    if not gamma > 1:
        raise BadParameter(f"gamma must exceed 1, got {gamma}")
    return gamma / (gamma - 1.0)


@dataclass(frozen=True)
class Lagrangian:
    """L(q) = coef * |q|**gamma_conj together with its growth constant C_L."""

    gamma_conj: float
    coef: float
    c_l: float

    def value(self, q) -> np.ndarray:
        return self.coef * _norm(q) ** self.gamma_conj

    def grad(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        r = _norm(q)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, self.coef * self.gamma_conj * r ** (self.gamma_conj - 2.0), 0.0)
        return scale * q


@dataclass(frozen=True)
class Hamiltonian:
    """H(p) = (coef / gamma) |p|**gamma plus an additive growth slack k_h.

    ``k_h`` does not change H (the pure power has H(0) = 0); it is the
    constant K_H of the growth assumptions and only enters thresholds.
    """

    gamma: float
    coef: float = 1.0
    k_h: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma > 1:
            raise BadParameter(f"gamma must exceed 1, got {self.gamma}")
        if not self.coef > 0:
            raise BadParameter(f"Hamiltonian coefficient must be positive, got {self.coef}")
        if self.k_h < 0:
            raise BadParameter(f"k_h must be nonnegative, got {self.k_h}")

    @property
    def gamma_conj(self) -> float:
        return conjugate_exponent(self.gamma)

    @property
    def c_h(self) -> float:
        """Smallest C_H > 1 for which the three growth lines hold for this H."""
        g, c = self.gamma, self.coef
        return max(c / g, g / c, c, g / (c * (g - 1.0)), 1.0 + 1e-12)

    def value(self, p) -> np.ndarray:
        return (self.coef / self.gamma) * _norm(p) ** self.gamma

    def grad(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        r = _norm(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, self.coef * r ** (self.gamma - 2.0), 0.0)
        return scale * p

    def lagrangian_coef(self) -> float:
        gc = self.gamma_conj
        return self.coef ** (1.0 - gc) / gc

    def c_l_sharp(self) -> float:
        """Largest C_L for which all Lagrangian growth bounds hold for L = a|q|^g'."""
        a, gc = self.lagrangian_coef(), self.gamma_conj
        return min(a, a * (gc - 1.0), 1.0 / (a * gc))

    def c_l_generic(self) -> float:
        """C_L implied only by the two-sided bound C_H^-1|p|^g - K_H <= H <= C_H|p|^g + K_H."""
        g, gc, ch = self.gamma, self.gamma_conj, self.c_h
        a_lo = (g * ch) ** (1.0 - gc) / gc
        a_hi = (g / ch) ** (1.0 - gc) / gc
        return min(a_lo, 1.0 / max(a_hi, self.k_h, 1e-300))

    def lagrangian(self, sharp: bool = True) -> Lagrangian:
        c_l = self.c_l_sharp() if sharp else self.c_l_generic()
        return Lagrangian(self.gamma_conj, self.lagrangian_coef(), c_l)


def hamiltonian_value(h: Hamiltonian, p) -> float | np.ndarray:
    return h.value(p)


def hamiltonian_grad(h: Hamiltonian, p) -> np.ndarray:
    return h.grad(p)


def legendre(h: Hamiltonian, q) -> float | np.ndarray:
    """Closed-form sup_p [p.q - H(p)] for the power model."""
    return h.lagrangian_coef() * _norm(q) ** h.gamma_conj


def kinetic_density(m, w, lag: Lagrangian):
    """m L(-w/m), 0 at (0, 0), and INFEASIBLE elsewhere off m > 0.

    ``m`` may be a scalar with ``w`` a vector, or a field of shape S with
    ``w`` of shape ``(k, *S)``.
    """
    m = np.asarray(m, dtype=float)
    r = _norm(w)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = lag.coef * r**lag.gamma_conj / m ** (lag.gamma_conj - 1.0)
    val = np.where(m > 0, val, np.where((m == 0) & (r == 0), 0.0, INFEASIBLE))
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class Coupling:
    """f(x, m) = sign * c_f * a(x) * m**(q-1) + k_f * b(x).

    ``sign`` is -1 for aggregative (crowd-seeking) and +1 for repulsive
    couplings.  Weights default to 1 and may be scalars or arrays matching
    the fields the coupling is evaluated on.
    """

    c_f: float
    q: float
    k_f: float = 0.0
    sign: int = -1
    a_weight: object = field(default=None, compare=False)
    b_weight: object = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.c_f < 0 or self.k_f < 0:
            raise BadParameter("c_f and k_f must be nonnegative")
        if not self.q > 1:
            raise BadParameter(f"q must exceed 1, got {self.q}")
        if self.sign not in (-1, 1):
            raise BadParameter(f"sign must be -1 or +1, got {self.sign}")

    def _weights(self, cell=None):
        a = 1.0 if self.a_weight is None else np.asarray(self.a_weight, dtype=float)
        b = 1.0 if self.b_weight is None else np.asarray(self.b_weight, dtype=float)
        if cell is not None:
            a = a if np.ndim(a) == 0 else a[cell]
            b = b if np.ndim(b) == 0 else b[cell]
        return a, b

    @property
    def is_constant(self) -> bool:
        return all(
            w is None or np.ptp(np.asarray(w, dtype=float)) == 0 for w in (self.a_weight, self.b_weight)
        )

    def f(self, m, cell=None):
        m = np.asarray(m, dtype=float)
        if np.any(m < 0):
            raise NegativeDensity(f"coupling evaluated at negative density {m.min():.3e}")
        a, b = self._weights(cell)
        return self.sign * self.c_f * a * m ** (self.q - 1.0) + self.k_f * b

    def df(self, m, cell=None):
        m = np.asarray(m, dtype=float)
        a, _ = self._weights(cell)
        with np.errstate(divide="ignore"):
            return self.sign * self.c_f * (self.q - 1.0) * a * m ** (self.q - 2.0)

    def F(self, m, cell=None):
        m = np.asarray(m, dtype=float)
        a, b = self._weights(cell)
        mp = np.maximum(m, 0.0)
        val = self.sign * (self.c_f / self.q) * a * mp**self.q + self.k_f * b * mp
        return np.where(m < 0, INFEASIBLE, val)

    def at_one(self, cell=None):
        """f(x, 1)."""
        return self.f(1.0, cell)


def coupling_value(c: Coupling, cell, m: float) -> float:
    return float(c.f(m, cell))


def potential_value(c: Coupling, cell, m: float) -> float:
    return float(c.F(m, cell))


@dataclass(frozen=True)
class Mollifier:
    """Truncated Gaussian kernel of width ``epsilon`` (physical length).

    ``epsilon = 0`` is the identity.  Convolution reflects evenly at the
    walls, so constants are preserved and the discrete operator is symmetric.
    """

    epsilon: float
    truncation: float = 3.0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise BadParameter(f"epsilon must be nonnegative, got {self.epsilon}")

    def kernel(self, h: float) -> np.ndarray:
        if self.epsilon == 0:
            return np.ones(1)
        radius = int(np.floor(self.truncation * self.epsilon / h + 1e-12))
        x = np.arange(-radius, radius + 1) * h
        k = np.exp(-0.5 * (x / self.epsilon) ** 2)
        return k / k.sum()

    def apply(self, g: Grid, s) -> np.ndarray:
        out = check_scalar(g, s)
        for axis in range(g.dim):
            k = self.kernel(g.spacing[axis])
            if k.size > 1:
                out = ndimage.convolve1d(out, k, axis=axis, mode="reflect")
        return out


def mollified_coupling(c: Coupling, mol: Mollifier, m, g: Grid) -> np.ndarray:
    """f_eps[m] = (f(., m * chi) * chi): smoothing applied before and after f."""
    m = check_scalar(g, m)
    if np.any(m < 0):
        raise NegativeDensity(f"density has negative entries (min {m.min():.3e})")
    return mol.apply(g, c.f(mol.apply(g, m)))


def mollified_potential(c: Coupling, mol: Mollifier, m, g: Grid) -> float:
    """F_eps[m] = integral of F(x, m * chi)."""
    m = check_scalar(g, m)
    vals = c.F(mol.apply(g, m))
    return float(np.sum(vals) * g.cell_volume)
