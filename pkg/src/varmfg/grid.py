"""Uniform rectangular grids with Neumann-compatible difference operators.

Scalar fields live at cell centres and are stored as arrays of shape
``grid.shape``.  Vector fields are stored as arrays of shape
``(dim, *grid.shape)``: component ``k`` at index ``i`` is the value on the
face between cell ``i`` and cell ``i + e_k``.  The face past the last cell
of each line is the wall; it carries no flux and is always zero.

With this layout the gradient is the forward difference (centred at the
face), the divergence is minus its transpose under the cell-volume inner
product, and the Laplacian is their composition, i.e. the compact
five-point Neumann stencil obtained by ghost reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import IncompatibleRHS, ShapeMismatch, SingularSystem

ScalarField = np.ndarray
VectorField = np.ndarray

TOL_COMPAT = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on a box of the given side lengths.

    Args:
        dim: spatial dimension, 1 or 2.
        cells: number of cells along each axis (at least 4).
        lengths: side lengths of the box; defaults to the unit box.
    """

    dim: int
    cells: int
    lengths: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.cells) != self.cells or self.cells < 4:
            raise ValueError(f"cells must be an integer >= 4, got {self.cells}")
        object.__setattr__(self, "cells", int(self.cells))
        lengths = tuple(float(x) for x in self.lengths) or (1.0,) * self.dim
        if len(lengths) != self.dim or min(lengths) <= 0:
            raise ValueError(f"lengths must be {self.dim} positive numbers, got {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def size(self) -> int:
        return self.cells**self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / self.cells for length in self.lengths)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def centers(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates, one array of shape ``self.shape`` per axis."""
        return tuple(np.meshgrid(*(self.centers(k) for k in range(self.dim)), indexing="ij"))

    def face_mesh(self, axis: int) -> tuple[np.ndarray, ...]:
        """Coordinates of the faces carrying component ``axis`` of a vector field."""
        coords = [self.centers(k) for k in range(self.dim)]
        coords[axis] = (np.arange(self.cells) + 1.0) * self.spacing[axis]
        return tuple(np.meshgrid(*coords, indexing="ij"))

    def interior_faces(self) -> np.ndarray:
        """Boolean mask of shape ``(dim, *shape)``; False on wall faces."""
        mask = np.ones((self.dim, *self.shape), dtype=bool)
        for k in range(self.dim):
            idx = [k] + [slice(None)] * self.dim
            idx[1 + k] = -1
            mask[tuple(idx)] = False
        return mask

    def constant(self, value: float) -> ScalarField:
        return np.full(self.shape, float(value))

    def zero_vector(self) -> VectorField:
        return np.zeros((self.dim, *self.shape))


def check_scalar(g: Grid, s) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if arr.shape != g.shape:
        if arr.size == g.size:
            return arr.reshape(g.shape)
        raise ShapeMismatch(f"scalar field of shape {arr.shape} on grid of shape {g.shape}")
    return arr


def check_vector(g: Grid, v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    want = (g.dim, *g.shape)
    if arr.shape != want:
        if arr.size == g.dim * g.size:
            return arr.reshape(want)
        raise ShapeMismatch(f"vector field of shape {arr.shape}, expected {want}")
    return arr


def _forward_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -1.0 / h)
    main[-1] = 0.0
    upper = np.full(n - 1, 1.0 / h)
    return sp.diags([main, upper], [0, 1], shape=(n, n), format="csr")


@lru_cache(maxsize=32)
def axis_difference_matrices(g: Grid) -> tuple[sp.csr_matrix, ...]:
    """Forward difference along each axis, zero on the wall face."""
    mats = []
    for k in range(g.dim):
        factors = [sp.identity(g.cells, format="csr")] * g.dim
        factors[k] = _forward_1d(g.cells, g.spacing[k])
        mat = factors[0]
        for fac in factors[1:]:
            mat = sp.kron(mat, fac, format="csr")
        mats.append(mat.tocsr())
    return tuple(mats)


@lru_cache(maxsize=32)
def gradient_matrix(g: Grid) -> sp.csr_matrix:
    return sp.vstack(axis_difference_matrices(g), format="csr")


@lru_cache(maxsize=32)
def divergence_matrix(g: Grid) -> sp.csr_matrix:
    return (-gradient_matrix(g).T).tocsr()


@lru_cache(maxsize=32)
def laplacian_matrix(g: Grid) -> sp.csr_matrix:
    return (divergence_matrix(g) @ gradient_matrix(g)).tocsr()


def gradient(g: Grid, s: ScalarField) -> VectorField:
    s = check_scalar(g, s)
    return (gradient_matrix(g) @ s.ravel()).reshape((g.dim, *g.shape))


def divergence(g: Grid, v: VectorField) -> ScalarField:
    v = check_vector(g, v)
    return (divergence_matrix(g) @ v.ravel()).reshape(g.shape)


def laplacian_neumann(g: Grid, s: ScalarField) -> ScalarField:
    s = check_scalar(g, s)
    return (laplacian_matrix(g) @ s.ravel()).reshape(g.shape)


def integrate(g: Grid, s: ScalarField) -> float:
    s = check_scalar(g, s)
    return float(np.sum(s) * g.cell_volume)


def mean(g: Grid, s: ScalarField) -> float:
    return integrate(g, s) / g.volume


def inner(g: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Cell-volume weighted inner product of two scalar or two vector fields."""
    return float(np.sum(np.asarray(a) * np.asarray(b)) * g.cell_volume)


def lp_norm(g: Grid, s: ScalarField, p: float) -> float:
    s = np.abs(check_scalar(g, s))
    if np.isinf(p):
        return float(s.max())
    return float((np.sum(s**p) * g.cell_volume) ** (1.0 / p))


def faces_behind(g: Grid, v: VectorField) -> VectorField:
    """Entry ``[k, i]`` holds the value of ``v`` on the face ``i - e_k/2``.

    The face behind the first cell of each line is a wall, so it is zero.
    """
    v = check_vector(g, v)
    out = np.zeros_like(v)
    for k in range(g.dim):
        dst = [k] + [slice(None)] * g.dim
        src = [k] + [slice(None)] * g.dim
        dst[1 + k] = slice(1, None)
        src[1 + k] = slice(None, -1)
        out[tuple(dst)] = v[tuple(src)]
    return out


def faces_ahead(g: Grid, v: VectorField) -> VectorField:
    """Adjoint of :func:`faces_behind`: entry ``[k, i]`` collects ``v[k, i + e_k]``."""
    v = check_vector(g, v)
    out = np.zeros_like(v)
    for k in range(g.dim):
        dst = [k] + [slice(None)] * g.dim
        src = [k] + [slice(None)] * g.dim
        dst[1 + k] = slice(None, -1)
        src[1 + k] = slice(1, None)
        out[tuple(dst)] = v[tuple(src)]
    return out


def cell_vectors(g: Grid, v: VectorField) -> VectorField:
    """Average the two faces of each cell along every axis (walls count as zero)."""
    v = check_vector(g, v)
    return 0.5 * (v + faces_behind(g, v))


def cell_magnitude(g: Grid, v: VectorField) -> ScalarField:
    return np.sqrt(np.sum(cell_vectors(g, v) ** 2, axis=0))


@lru_cache(maxsize=32)
def _poisson_factor(g: Grid):
    n = g.size
    ones = sp.csr_matrix(np.full((n, 1), g.cell_volume))
    bordered = sp.bmat([[laplacian_matrix(g), ones], [ones.T, None]], format="csc")
    return splu(bordered)


def poisson_neumann_zero_mean(g: Grid, rhs: ScalarField, tol_compat: float = TOL_COMPAT) -> ScalarField:
    """Solve ``laplacian_neumann(s) = rhs`` with ``integrate(s) = 0``.

    Raises:
        IncompatibleRHS: if ``|integrate(rhs)|`` exceeds ``tol_compat``.
        SingularSystem: if the factorization fails or returns non-finite values.
    """
    rhs = check_scalar(g, rhs)
    total = integrate(g, rhs)
    if abs(total) > tol_compat:
        raise IncompatibleRHS(f"integral of right-hand side is {total:.3e}")
    try:
        sol = _poisson_factor(g).solve(np.append(rhs.ravel(), 0.0))
    except RuntimeError as exc:  # pragma: no cover - splu failures are rare
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("non-finite Poisson solution")
    s = sol[:-1].reshape(g.shape)
    return s - mean(g, s)


def green_apply(g: Grid, rhs: ScalarField) -> ScalarField:
    """Zero-mean Poisson solve after projecting ``rhs`` onto mean-zero fields."""
    rhs = check_scalar(g, rhs)
    return poisson_neumann_zero_mean(g, rhs - mean(g, rhs))
