import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmfg.errors import BadParameter
from varmfg.exponents import (
    Regime,
    barrier_delta,
    build_ledger,
    cf_threshold_mass_critical,
    classify_regime,
    gradient_target,
    kh_threshold,
    mass_critical,
    sobolev_critical,
)
from varmfg.hjb import barrier_levels
from varmfg.model import Coupling, Hamiltonian


@settings(max_examples=60)
@given(st.floats(1.1, 5.0), st.integers(1, 6))
def test_mass_critical_below_sobolev_critical(gamma, n):
    assert 1.0 < mass_critical(gamma, n) < sobolev_critical(gamma, n)


@settings(max_examples=80)
@given(st.floats(1.1, 5.0), st.integers(1, 6), st.floats(1.01, 8.0))
def test_classification_is_consistent(gamma, n, q):
    regime = classify_regime(gamma, n, q)
    qb, qc = mass_critical(gamma, n), sobolev_critical(gamma, n)
    expected = {
        Regime.SUBCRITICAL: q < qb,
        Regime.MASS_CRITICAL: math.isclose(q, qb, rel_tol=1e-12),
        Regime.SUPERCRITICAL: qb < q < qc,
        Regime.SOBOLEV_CRITICAL: math.isclose(q, qc, rel_tol=1e-12),
        Regime.BEYOND: q > qc,
    }
    assert expected[regime]


def test_exact_boundaries():
    assert classify_regime(2.0, 1, 3.0) is Regime.MASS_CRITICAL
    assert classify_regime(2.0, 4, 2.0) is Regime.SOBOLEV_CRITICAL
    assert classify_regime(2.0, 4, 2.5) is Regime.BEYOND
    with pytest.raises(BadParameter):
        classify_regime(2.0, 1, 1.0)
    with pytest.raises(BadParameter):
        mass_critical(2.0, 0)


def test_threshold_formulas():
    assert kh_threshold(2.0, 0.5) == pytest.approx(0.25)
    assert gradient_target(1.0, 1.0, 2.0, 2.0) == pytest.approx(1.0 / 8.0)
    assert cf_threshold_mass_critical(0.5, 1.0, 3.0) == pytest.approx(1.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(0.01, 0.95))
def test_barrier_delta_inverts_lower_root(gamma, frac):
    fold = (1.0 / gamma) ** (1.0 / (gamma - 1.0))
    y = frac * fold
    delta = barrier_delta(y, gamma)
    assert barrier_levels(1.0, gamma, delta)[0] == pytest.approx(y, rel=1e-9)


def test_ledger_regimes_and_serialization():
    h = Hamiltonian(2.0)
    sub = build_ledger(h, Coupling(1.0, 2.0), 1, 1.0)
    assert sub.regime == "subcritical" and math.isinf(sub.alpha)
    crit = build_ledger(h, Coupling(0.01, 2.0), 4, 1.0)
    assert crit.regime == "sobolev_critical" and crit.alpha == pytest.approx(crit.alpha_hat)
    sup = build_ledger(h, Coupling(0.01, 1.8), 4, 1.0)
    assert sup.alpha == pytest.approx(sup.alpha_bar)
    doc = json.loads(json.dumps(sub.to_dict()))
    assert doc["alpha"] == "inf" and doc["q_c"] == "inf"
    assert doc["c_l"] == pytest.approx(0.5)
    assert 0 < crit.delta
