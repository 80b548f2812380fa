import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmfg.errors import IncompatibleRHS, ShapeMismatch
from varmfg.grid import (
    Grid,
    divergence,
    gradient,
    green_apply,
    inner,
    integrate,
    laplacian_matrix,
    laplacian_neumann,
    lp_norm,
    mean,
    poisson_neumann_zero_mean,
)

grids = st.sampled_from([Grid(1, 8), Grid(1, 33), Grid(2, 6), Grid(2, 11), Grid(2, 4)])


def test_geometry():
    g = Grid(2, 10, (2.0, 1.0))
    assert g.shape == (10, 10)
    assert g.spacing == (0.2, 0.1)
    assert g.volume == pytest.approx(2.0)
    assert g.centers(0)[0] == pytest.approx(0.1)
    assert integrate(g, g.constant(1.0)) == pytest.approx(2.0)


def test_wall_faces_are_zero():
    g = Grid(2, 5)
    v = gradient(g, np.random.default_rng(0).normal(size=g.shape))
    assert np.all(v[0, -1, :] == 0) and np.all(v[1, :, -1] == 0)


@settings(max_examples=30, deadline=None)
@given(grids, st.integers(0, 2**31 - 1))
def test_divergence_is_minus_adjoint_of_gradient(g, seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=g.shape)
    v = rng.normal(size=(g.dim, *g.shape)) * g.interior_faces()
    assert inner(g, gradient(g, s), v) == pytest.approx(-inner(g, s, divergence(g, v)), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(grids, st.integers(0, 2**31 - 1))
def test_laplacian_conserves_mass_and_kills_constants(g, seed):
    s = np.random.default_rng(seed).normal(size=g.shape)
    assert abs(integrate(g, laplacian_neumann(g, s))) < 1e-9 * max(1.0, np.abs(s).max()) / min(g.spacing) ** 2
    assert np.abs(laplacian_neumann(g, g.constant(3.0))).max() < 1e-9


def test_laplacian_matrix_symmetric_negative_semidefinite():
    g = Grid(2, 7)
    lap = laplacian_matrix(g).toarray()
    assert np.allclose(lap, lap.T)
    assert np.linalg.eigvalsh(lap).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(grids, st.integers(0, 2**31 - 1))
def test_poisson_inverts_laplacian(g, seed):
    r = np.random.default_rng(seed).normal(size=g.shape)
    r -= mean(g, r)
    u = poisson_neumann_zero_mean(g, r)
    assert abs(mean(g, u)) < 1e-10
    assert np.abs(laplacian_neumann(g, u) - r).max() < 1e-8


def test_poisson_rejects_incompatible_rhs():
    g = Grid(1, 16)
    with pytest.raises(IncompatibleRHS):
        poisson_neumann_zero_mean(g, g.constant(1.0))
    assert np.abs(green_apply(g, g.constant(1.0))).max() < 1e-12


def test_cosine_mode_is_discrete_eigenfunction():
    g = Grid(1, 64)
    x = g.centers()
    s = np.cos(np.pi * x)
    eig = -(2.0 / g.spacing[0]) ** 2 * np.sin(np.pi * g.spacing[0] / 2.0) ** 2
    assert np.allclose(laplacian_neumann(g, s), eig * s, atol=1e-10)


def test_lp_norm_of_constant():
    g = Grid(2, 8, (2.0, 2.0))
    assert lp_norm(g, g.constant(1.0), 3.0) == pytest.approx(4.0 ** (1.0 / 3.0))


def test_shape_mismatch():
    g = Grid(1, 8)
    with pytest.raises(ShapeMismatch):
        gradient(g, np.zeros(9))
    with pytest.raises(ShapeMismatch):
        divergence(g, np.zeros((2, 8)))
