"""One-sided drift coefficients shared by the HJB linearization and the FP operator.

A drift is stored as two arrays of shape ``(dim, *shape)``: ``forward[k, i]``
multiplies the forward difference of cell ``i`` along axis ``k`` and is
nonpositive, ``backward[k, i]`` multiplies the backward difference and is
nonnegative.  The advection part of the linearized HJB operator is

    B u = sum_k forward_k * (D+_k u) + backward_k * (D-_k u),

and the Fokker-Planck operator is assembled as the exact transpose of
``-lap + B``.  The associated face flux is

    w_k(i + e_k/2) = -(forward_k(i) m(i) + backward_k(i + e_k) m(i + e_k)),

i.e. the density is taken from the cell the agents leave.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid, axis_difference_matrices, check_vector, faces_ahead, faces_behind


@dataclass(frozen=True, eq=False)
class UpwindDrift:
    forward: np.ndarray
    backward: np.ndarray

    @classmethod
    def zero(cls, g: Grid) -> "UpwindDrift":
        return cls(g.zero_vector(), g.zero_vector())

    @classmethod
    def from_face_field(cls, g: Grid, b) -> "UpwindDrift":
        """Upwind split of a drift given on faces (component k on the k-faces)."""
        b = check_vector(g, b)
        b = b * g.interior_faces()
        return cls(np.minimum(b, 0.0), np.maximum(faces_behind(g, b), 0.0))

    def stacked(self) -> np.ndarray:
        """All one-sided coefficients of each cell, shape ``(2 * dim, *shape)``."""
        return np.concatenate([self.forward, self.backward], axis=0)

    def cell_magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.stacked() ** 2, axis=0))

    def scaled(self, factor: float) -> "UpwindDrift":
        return UpwindDrift(factor * self.forward, factor * self.backward)


def as_drift(g: Grid, b) -> UpwindDrift:
    if isinstance(b, UpwindDrift):
        return b
    return UpwindDrift.from_face_field(g, b)


@lru_cache(maxsize=32)
def backward_difference_matrices(g: Grid) -> tuple[sp.csr_matrix, ...]:
    """D-_k = S_k D+_k where S_k moves face values one cell forward."""
    mats = []
    for k, dk in enumerate(axis_difference_matrices(g)):
        factors = [sp.identity(g.cells, format="csr")] * g.dim
        factors[k] = sp.diags([np.ones(g.cells - 1)], [-1], shape=(g.cells, g.cells), format="csr")
        shift = factors[0]
        for fac in factors[1:]:
            shift = sp.kron(shift, fac, format="csr")
        mats.append((shift @ dk).tocsr())
    return tuple(mats)


def advection_matrix(g: Grid, drift: UpwindDrift) -> sp.csr_matrix:
    """Sparse matrix of u -> sum_k forward_k D+_k u + backward_k D-_k u."""
    out = sp.csr_matrix((g.size, g.size))
    for k, (dp, dm) in enumerate(zip(axis_difference_matrices(g), backward_difference_matrices(g))):
        out = out + sp.diags(drift.forward[k].ravel()) @ dp + sp.diags(drift.backward[k].ravel()) @ dm
    return out.tocsr()


def upwind_flux(g: Grid, drift: UpwindDrift, m) -> np.ndarray:
    """Face flux -(m b) with the density taken upwind."""
    m = np.asarray(m, dtype=float).reshape(g.shape)
    w = -(drift.forward * m + faces_ahead(g, drift.backward * m))
    return w * g.interior_faces()
