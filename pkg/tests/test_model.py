import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from varmfg.errors import BadParameter, NegativeDensity
from varmfg.grid import Grid, integrate
from varmfg.model import (
    INFEASIBLE,
    Coupling,
    Hamiltonian,
    Mollifier,
    conjugate_exponent,
    kinetic_density,
    legendre,
    mollified_coupling,
)

gammas = st.floats(1.2, 4.0)
coefs = st.floats(0.3, 3.0)


@settings(max_examples=40, deadline=None)
@given(gammas, coefs, st.floats(-5.0, 5.0))
def test_legendre_matches_numerical_sup(gamma, coef, q):
    h = Hamiltonian(gamma, coef)
    reach = 2.0 * (abs(q) / coef) ** (1.0 / (gamma - 1.0)) + 1.0
    res = minimize_scalar(lambda p: -(p * q - h.value(p)), bounds=(-reach, reach), method="bounded",
                          options={"xatol": 1e-12})
    assert -res.fun == pytest.approx(legendre(h, q), rel=1e-6, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(gammas, coefs, st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_fenchel_young(gamma, coef, p, q):
    h = Hamiltonian(gamma, coef)
    lag = h.lagrangian()
    p, q = np.array(p), np.array(q)
    assert h.value(p) + lag.value(q) >= p @ q - 1e-9
    dual = h.grad(p)
    assert h.value(p) + lag.value(dual) == pytest.approx(p @ dual, rel=1e-9, abs=1e-9)


def test_quadratic_constants():
    h = Hamiltonian(2.0)
    assert h.lagrangian_coef() == pytest.approx(0.5)
    assert h.c_l_sharp() == pytest.approx(0.5)
    assert conjugate_exponent(1.5) == pytest.approx(3.0)
    with pytest.raises(BadParameter):
        Hamiltonian(1.0)


def test_kinetic_density_cases():
    lag = Hamiltonian(2.0).lagrangian()
    assert kinetic_density(0.0, np.zeros(2), lag) == 0.0
    assert kinetic_density(0.0, np.array([1.0, 0.0]), lag) == INFEASIBLE
    assert kinetic_density(2.0, np.array([2.0, 0.0]), lag) == pytest.approx(0.5 * 4.0 / 2.0)


@settings(max_examples=40, deadline=None)
@given(gammas, st.floats(0.1, 5.0), st.floats(-4, 4), st.floats(0.1, 10.0))
def test_kinetic_density_is_one_homogeneous(gamma, m, w, t):
    lag = Hamiltonian(gamma).lagrangian()
    assert kinetic_density(t * m, np.array([t * w]), lag) == pytest.approx(t * kinetic_density(m, np.array([w]), lag), rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.1, 4.0), st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.sampled_from([-1, 1]), st.floats(0.05, 4.0))
def test_potential_derivative_is_coupling(q, c_f, k_f, sign, m):
    c = Coupling(c_f, q, k_f, sign)
    step = 1e-6 * max(1.0, m)
    num = (c.F(m + step) - c.F(m - step)) / (2 * step)
    assert float(num) == pytest.approx(float(c.f(m)), rel=1e-6, abs=1e-6)
    assert float(c.at_one()) == pytest.approx(sign * c_f + k_f)


def test_coupling_rejects_negative_density():
    with pytest.raises(NegativeDensity):
        Coupling(1.0, 2.0).f(np.array([-1.0]))
    assert Coupling(1.0, 2.0).F(np.array([-1.0]))[0] == INFEASIBLE


@pytest.mark.parametrize("g", [Grid(1, 50), Grid(2, 20)])
def test_mollifier_preserves_constants_and_mass(g):
    mol = Mollifier(0.1)
    rng = np.random.default_rng(0)
    s = rng.random(g.shape)
    assert np.allclose(mol.apply(g, g.constant(2.5)), 2.5)
    assert integrate(g, mol.apply(g, s)) == pytest.approx(integrate(g, s), rel=1e-12)
    assert np.array_equal(Mollifier(0.0).apply(g, s), s)


def test_mollifier_is_symmetric_operator():
    g = Grid(1, 40)
    mol = Mollifier(0.07)
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=40), rng.normal(size=40)
    assert a @ mol.apply(g, b) == pytest.approx(b @ mol.apply(g, a), rel=1e-12)


def test_mollified_coupling_of_constant_density():
    g = Grid(1, 32)
    c = Coupling(2.0, 3.0, 0.5, -1)
    assert np.allclose(mollified_coupling(c, Mollifier(0.1), g.constant(1.0), g), -1.5)
    assert math.isclose(Mollifier(0.1).kernel(0.01).sum(), 1.0)
