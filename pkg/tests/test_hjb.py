import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmfg.errors import BadParameter, NoBarrier
from varmfg.grid import Grid, mean
from varmfg.hjb import (
    barrier_levels,
    discrete_hamiltonian,
    gradient_norm_report,
    hjb_jacobian,
    hjb_residual,
    solve_ergodic,
)
from varmfg.model import Hamiltonian

smooth_f = st.integers(0, 2**31 - 1)


def _rhs(g, seed, scale=3.0):
    rng = np.random.default_rng(seed)
    x = g.mesh()
    out = np.zeros(g.shape)
    for k in range(1, 4):
        out += rng.normal() * np.prod([np.cos(k * np.pi * xi) for xi in x], axis=0)
    return scale * out


@settings(max_examples=15, deadline=None)
@given(smooth_f, st.floats(-5.0, 5.0), st.sampled_from([1.5, 2.0, 3.0]))
def test_shift_covariance(seed, shift, gamma):
    g, h = Grid(1, 48), Hamiltonian(gamma)
    f = _rhs(g, seed)
    a, b = solve_ergodic(g, h, f), solve_ergodic(g, h, f + shift)
    assert b.lam == pytest.approx(a.lam + shift, abs=1e-9)
    assert np.abs(a.u - b.u).max() < 1e-8


@settings(max_examples=15, deadline=None)
@given(smooth_f, st.integers(0, 2**31 - 1))
def test_lambda_is_monotone_in_f(seed, seed2):
    g, h = Grid(1, 48), Hamiltonian(2.0)
    f1 = _rhs(g, seed)
    f2 = f1 + np.abs(_rhs(g, seed2, 1.0))
    assert solve_ergodic(g, h, f1).lam <= solve_ergodic(g, h, f2).lam + 1e-10


@pytest.mark.parametrize("scheme", ["upwind", "centered"])
def test_returned_pair_has_small_residual(scheme):
    g, h = Grid(2, 20), Hamiltonian(1.5)
    f = _rhs(g, 7)
    sol = solve_ergodic(g, h, f, scheme=scheme, tol=1e-10)
    assert np.abs(hjb_residual(g, h, sol.u, sol.lam, f, scheme)).max() <= 1e-10
    assert abs(mean(g, sol.u)) < 1e-12


@pytest.mark.parametrize("scheme", ["upwind", "centered"])
def test_jacobian_matches_finite_differences(scheme):
    g, h = Grid(2, 9), Hamiltonian(2.5)
    rng = np.random.default_rng(0)
    u, du = rng.normal(size=g.shape), rng.normal(size=g.shape)
    eps = 1e-7
    num = (discrete_hamiltonian(g, h, u + eps * du, scheme)[0] - discrete_hamiltonian(g, h, u - eps * du, scheme)[0]) / (2 * eps)
    jac = hjb_jacobian(g, h, u, scheme) @ du.ravel()
    lap_part = hjb_jacobian(g, None, u) @ du.ravel()
    assert np.allclose(jac - lap_part, num.ravel(), atol=1e-5)


def test_constant_rhs_gives_flat_solution():
    g = Grid(1, 32)
    sol = solve_ergodic(g, Hamiltonian(2.0), g.constant(-1.7))
    assert sol.lam == pytest.approx(-1.7)
    assert np.abs(sol.u).max() < 1e-14
    assert gradient_norm_report(g, sol, 2.0, 1) == 0.0


def test_unknown_scheme():
    with pytest.raises(BadParameter):
        solve_ergodic(Grid(1, 8), Hamiltonian(2.0), np.zeros(8), scheme="lax")


def test_barrier_levels_quadratic_and_fold():
    y1, y2 = barrier_levels(1.0, 2.0, 0.2)
    assert (y1, y2) == pytest.approx(((1 - np.sqrt(0.2)) / 2, (1 + np.sqrt(0.2)) / 2))
    with pytest.raises(NoBarrier):
        barrier_levels(1.0, 2.0, 0.25)
    with pytest.raises(BadParameter):
        barrier_levels(1.0, 2.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(0.2, 3.0), st.floats(0.01, 0.9))
def test_barrier_roots_solve_equation(gamma, c, frac):
    fold = (1.0 / (c * gamma)) ** (1.0 / (gamma - 1.0))
    delta = frac * (fold - c * fold**gamma)
    for y in barrier_levels(c, gamma, delta):
        assert y == pytest.approx(c * y**gamma + delta, rel=1e-9, abs=1e-12)
