"""Critical exponents, regime classification and the ledger of thresholds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

from .errors import BadParameter, NoBarrier
from .model import Coupling, Hamiltonian, conjugate_exponent

EQUALITY_TOL = 1e-12


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    MASS_CRITICAL = "mass_critical"
    SUPERCRITICAL = "supercritical"
    SOBOLEV_CRITICAL = "sobolev_critical"
    BEYOND = "beyond"


def _check_gamma_n(gamma: float, n: int) -> float:
    if not gamma > 1:
        raise BadParameter(f"gamma must exceed 1, got {gamma}")
    if int(n) != n or n < 1:
        raise BadParameter(f"dimension must be a positive integer, got {n}")
    return conjugate_exponent(gamma)


def mass_critical(gamma: float, n: int) -> float:
    """q_bar = 1 + gamma'/N, evaluated as (N + gamma')/N to keep one rounding."""
    gc = _check_gamma_n(gamma, n)
    return (n + gc) / n


def sobolev_critical(gamma: float, n: int) -> float:
    """q_c = 1 + gamma'/(N - gamma') if gamma' < N, else infinity."""
    gc = _check_gamma_n(gamma, n)
    if gc >= n:
        return math.inf
    return n / (n - gc)


def _close(a: float, b: float) -> bool:
    return math.isfinite(b) and abs(a - b) <= EQUALITY_TOL * max(1.0, abs(b))


def classify_regime(gamma: float, n: int, q: float) -> Regime:
    if not q > 1:
        raise BadParameter(f"q must exceed 1, got {q}")
    q_bar = mass_critical(gamma, n)
    q_c = sobolev_critical(gamma, n)
    if _close(q, q_bar):
        return Regime.MASS_CRITICAL
    if q < q_bar:
        return Regime.SUBCRITICAL
    if _close(q, q_c):
        return Regime.SOBOLEV_CRITICAL
    if q < q_c:
        return Regime.SUPERCRITICAL
    return Regime.BEYOND


def _positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise BadParameter(f"{name} must be positive, got {value}")


def alpha_bar(cl: float, cf: float, cq: float, q: float) -> float:
    """Ball radius (C_L / (C_f C_q))**q'; infinite when C_f = 0."""
    _positive(cl=cl, cq=cq)
    if not q > 1:
        raise BadParameter(f"q must exceed 1, got {q}")
    if cf < 0:
        raise BadParameter(f"cf must be nonnegative, got {cf}")
    if cf == 0:
        return math.inf
    return (cl / (cf * cq)) ** conjugate_exponent(q)


def k_prime(cl: float, cq: float, q: float, kf: float) -> float:
    return cl + 1.0 / cl + 2.0 * kf + cl / (q * cq)


def k_dprime(cl: float, kf: float) -> float:
    return cl + 1.0 / cl + 2.0 * kf


def cf_threshold_supercritical(cl: float, cq: float, q: float, kf: float) -> float:
    """min{C_L/C_q, (K' q')**(1-q) (C_L/C_q)**q}."""
    _positive(cl=cl, cq=cq)
    if not q > 1 or kf < 0:
        raise BadParameter("need q > 1 and kf >= 0")
    kp = k_prime(cl, cq, q, kf)
    ratio = cl / cq
    return min(ratio, (kp * conjugate_exponent(q)) ** (1.0 - q) * ratio**q)


def cf_threshold_critical(cl: float, cq: float, q: float, kf: float) -> tuple[float, float]:
    """(alpha_hat, q C_L / (C_q (alpha_hat + 1))) with alpha_hat = (C_q K''/C_L + 1)**q."""
    _positive(cl=cl, cq=cq)
    if not q > 1 or kf < 0:
        raise BadParameter("need q > 1 and kf >= 0")
    a_hat = (cq * k_dprime(cl, kf) / cl + 1.0) ** q
    return a_hat, q * cl / (cq * (a_hat + 1.0))


def cf_threshold_mass_critical(cl: float, cq: float, q: float) -> float:
    """Largest C_f for which the energy stays bounded below at q = q_bar."""
    _positive(cl=cl, cq=cq)
    return q * cl / cq


def kh_threshold(ce: float, cs: float) -> float:
    """K_H <= 1 / (4 C_E C_S)."""
    _positive(ce=ce, cs=cs)
    return 1.0 / (4.0 * ce * cs)


def gradient_target(ce: float, cs: float, ch: float, gamma: float) -> float:
    """Target bound (4 C_E C_S C_H)**(-1/(gamma-1)) on ||grad u||_{N(gamma-1)}."""
    _positive(ce=ce, cs=cs, ch=ch)
    return (4.0 * ce * cs * ch) ** (-1.0 / (gamma - 1.0))


def barrier_delta(y: float, gamma: float, c_model: float = 1.0, c_prime: float = 1.0) -> float:
    """Data size delta for which y is the lower root of y = C y**gamma + C' delta."""
    return (y - c_model * y**gamma) / c_prime


@dataclass(frozen=True)
class ConstantsLedger:
    gamma: float
    n: int
    q: float
    c_f: float
    k_f: float
    k_h: float
    c_h: float
    q_bar: float
    q_c: float
    c_q: float
    c_l: float
    c_l_generic: float
    c_e: float
    c_s: float
    alpha_bar: float
    alpha_hat: float
    k_prime: float
    k_dprime: float
    cf_threshold: float
    cf_threshold_supercritical: float
    cf_threshold_critical: float
    cf_threshold_mass_critical: float
    kh_threshold: float
    gradient_target: float
    delta: float
    regime: Regime
    alpha: float
    provenance: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, Regime):
                value = value.value
            elif isinstance(value, float) and not math.isfinite(value):
                value = "inf" if value > 0 else ("-inf" if value < 0 else "nan")
            out[key] = value
        return out

    @property
    def cf_satisfied(self) -> bool:
        return self.c_f < self.cf_threshold


def build_ledger(
    h: Hamiltonian,
    c: Coupling,
    n: int,
    c_q: float,
    c_e: float = 1.0,
    c_s: float = 1.0,
    sharp_cl: bool = True,
    barrier_c: float = 1.0,
    barrier_c_prime: float = 1.0,
    provenance: dict | None = None,
) -> ConstantsLedger:
    """Assemble every exponent and threshold for the model and measured constants."""
    from .hjb import barrier_levels

    gamma, q = h.gamma, c.q
    q_bar = mass_critical(gamma, n)
    q_c = sobolev_critical(gamma, n)
    regime = classify_regime(gamma, n, q)
    cl_sharp, cl_gen = h.c_l_sharp(), h.c_l_generic()
    c_l = cl_sharp if sharp_cl else cl_gen
    a_bar = alpha_bar(c_l, c.c_f, c_q, q)
    a_hat, cf_crit = cf_threshold_critical(c_l, c_q, q, c.k_f)
    cf_super = cf_threshold_supercritical(c_l, c_q, q, c.k_f)
    cf_mass = cf_threshold_mass_critical(c_l, c_q, q)
    target = gradient_target(c_e, c_s, h.c_h, gamma)
    # delta is the data size whose lower barrier root equals the target,
    # capped at the fold where the two roots merge.
    fold = (1.0 / (barrier_c * gamma)) ** (1.0 / (gamma - 1.0))
    y = min(target, fold)
    delta = barrier_delta(y, gamma, barrier_c, barrier_c_prime)
    try:
        barrier_levels(barrier_c, gamma, delta, barrier_c_prime)
    except NoBarrier:
        delta = 0.0
    if regime is Regime.SUBCRITICAL:
        cf_thr, alpha = math.inf, math.inf
    elif regime is Regime.MASS_CRITICAL:
        cf_thr, alpha = cf_mass, math.inf
    elif regime is Regime.SUPERCRITICAL:
        cf_thr, alpha = cf_super, a_bar
    elif regime is Regime.SOBOLEV_CRITICAL:
        cf_thr, alpha = cf_crit, a_hat
    else:
        cf_thr, alpha = 0.0, a_bar
    prov = {"c_q": "measured", "c_e": "measured", "c_s": "measured", "c_l": "sharp" if sharp_cl else "generic"}
    prov.update(provenance or {})
    return ConstantsLedger(
        gamma=gamma,
        n=int(n),
        q=q,
        c_f=c.c_f,
        k_f=c.k_f,
        k_h=h.k_h,
        c_h=h.c_h,
        q_bar=q_bar,
        q_c=q_c,
        c_q=c_q,
        c_l=c_l,
        c_l_generic=cl_gen,
        c_e=c_e,
        c_s=c_s,
        alpha_bar=a_bar,
        alpha_hat=a_hat,
        k_prime=k_prime(c_l, c_q, q, c.k_f),
        k_dprime=k_dprime(c_l, c.k_f),
        cf_threshold=cf_thr,
        cf_threshold_supercritical=cf_super,
        cf_threshold_critical=cf_crit,
        cf_threshold_mass_critical=cf_mass,
        kh_threshold=kh_threshold(c_e, c_s),
        gradient_target=target,
        delta=delta,
        regime=regime,
        alpha=alpha,
        provenance=prov,
    )
