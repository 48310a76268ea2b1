import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import eval_genlaguerre

from landau.errors import DomainError
from landau.specfun import (
    RadialMode,
    default_rule,
    gauss_laguerre_rule,
    laguerre,
    m_minus,
    radial_eigenfunction,
    radial_overlap,
)


def exact_laguerre(q, m, s_rational):
    """Independent oracle: the defining finite sum in exact rational arithmetic."""
    total = Fraction(0)
    for l in range(m_minus(m), q + 1):
        c = Fraction(
            math.factorial(q + m),
            math.factorial(m + l) * math.factorial(q - l) * math.factorial(l),
        )
        total += c * (-s_rational) ** l
    return total


def test_laguerre_single_term():
    # q=0, m=3: the sum has the single l=0 term, equal to 1 for any s
    assert laguerre(0, 3, 7.2) == 1.0


def test_laguerre_linear():
    # L_1^(0)(s) = 1 - s
    assert laguerre(1, 0, 2.0) == pytest.approx(-1.0, abs=1e-15)


def test_laguerre_against_recurrence_point():
    # oracle: one upward recurrence step sequence done by hand at (5, 2, 1.3)
    s = 1.3
    lm, lk = 1.0, 1.0 + 2 - s
    for n in range(1, 5):
        lm, lk = lk, ((2 * n + 2 + 1 - s) * lk - (n + 2) * lm) / (n + 1.0)
    assert laguerre(5, 2, 1.3) == pytest.approx(lk, rel=1e-14)


def test_laguerre_matches_exact_sum():
    # recurrence evaluation vs the defining sum in exact rational arithmetic
    for q in range(0, 21):
        for m in (-2, 0, 3):
            if q < m_minus(m):
                continue
            for snum in (1, 13, 77, 199, 250):
                s = Fraction(snum, 5)  # spans (0, 50]
                exact = float(exact_laguerre(q, m, s))
                got = float(laguerre(q, m, float(s)))
                if exact != 0.0:
                    assert abs(got - exact) <= 1e-10 * abs(exact)


def test_laguerre_matches_scipy_for_nonnegative_order():
    rng = np.random.default_rng(3)
    for q in range(0, 14):
        for m in range(0, 7):
            s = rng.uniform(0.0, 30.0, size=5)
            ref = eval_genlaguerre(q, m, s)
            got = laguerre(q, m, s)
            assert np.all(np.abs(got - ref) <= 1e-11 * np.maximum(np.abs(ref), 1.0))


def test_laguerre_domain_error():
    with pytest.raises(DomainError):
        laguerre(1, -3, 0.5)


def test_mode_invariants():
    with pytest.raises(DomainError):
        RadialMode(b=-1.0, q=0, m=0)
    with pytest.raises(DomainError):
        RadialMode(b=1.0, q=1, m=-2)
    RadialMode(b=1.0, q=2, m=-2)  # q = m_- is admissible


def test_ground_state_gaussian():
    # phi_{0,0}(rho) = sqrt(b) e^(-b rho^2/4), positive, unit norm in rho drho
    b = 1.0
    rho = np.linspace(0.0, 6.0, 200)
    phi = radial_eigenfunction(RadialMode(b, 0, 0), rho)
    assert np.allclose(phi, np.sqrt(b) * np.exp(-b * rho**2 / 4), rtol=1e-13)


def test_orthonormality_grid():
    # |<phi_q, phi_q'> - delta| < 1e-10 for q,q' <= 12, |m| <= 6
    b = 1.0
    rule = default_rule(b, 12, 6)
    ones = np.ones_like(rule.nodes)
    for m in (-6, -3, -1, 0, 1, 4, 6):
        lo = m_minus(m)
        for q in range(lo, lo + 13):
            for qp in range(q, lo + 13):
                val = radial_overlap(
                    RadialMode(b, q, m), RadialMode(b, qp, m), ones, rule
                )
                target = 1.0 if q == qp else 0.0
                assert abs(val - target) < 1e-10, (q, qp, m, val)


def test_sign_convention_near_origin():
    for q, m in [(0, 0), (1, 0), (2, 1), (2, -1), (3, -3), (5, -2)]:
        assert radial_eigenfunction(RadialMode(1.0, q, m), 1e-5) > 0.0


def test_first_excited_node():
    # phi_{1,0} changes sign at rho = sqrt(2) (zero of 1 - s at s = 1, s = b rho^2/2)
    mode = RadialMode(1.0, 1, 0)
    r0 = math.sqrt(2.0)
    assert radial_eigenfunction(mode, r0 - 1e-3) > 0
    assert radial_eigenfunction(mode, r0 + 1e-3) < 0
    assert abs(radial_eigenfunction(mode, r0)) < 1e-12


def test_negative_m_reflection():
    # phi_{q,m} for m < 0 spans the same eigenspace: equals phi_{q+m,-m}
    rho = np.linspace(0.01, 8.0, 50)
    a = radial_eigenfunction(RadialMode(1.0, 3, -2), rho)
    b_ = radial_eigenfunction(RadialMode(1.0, 1, 2), rho)
    assert np.allclose(a, b_, rtol=0, atol=1e-14)


def test_overlap_normalization_and_orthogonality():
    b = 1.0
    rule = default_rule(b, 4, 0)
    ones = np.ones_like(rule.nodes)
    same = radial_overlap(RadialMode(b, 1, 0), RadialMode(b, 1, 0), ones, rule)
    cross = radial_overlap(RadialMode(b, 0, 0), RadialMode(b, 1, 0), ones, rule)
    assert abs(same - 1.0) < 1e-12
    assert abs(cross) < 1e-12


def test_gaussian_overlap_closed_form():
    # <e^(-mu rho^2) phi_{0,m}, phi_{0,m}> = (b/(b+2mu))^(m+1), Gamma integral
    for b, mu in [(1.0, 0.5), (2.0, 1.0)]:
        rule = gauss_laguerre_rule(b, 120)
        w = np.exp(-mu * rule.nodes**2)
        for m in (0, 3, 17):
            got = radial_overlap(RadialMode(b, 0, m), RadialMode(b, 0, m), w, rule)
            assert got == pytest.approx((b / (b + 2 * mu)) ** (m + 1), rel=1e-10)
    # the documented reference point
    rule = gauss_laguerre_rule(1.0, 80)
    got = radial_overlap(
        RadialMode(1.0, 0, 0),
        RadialMode(1.0, 0, 0),
        np.exp(-0.5 * rule.nodes**2),
        rule,
    )
    assert got == pytest.approx(0.5, abs=1e-12)


def test_overlap_mode_mismatch():
    rule = default_rule(1.0, 2, 1)
    ones = np.ones_like(rule.nodes)
    with pytest.raises(DomainError):
        radial_overlap(RadialMode(1.0, 0, 0), RadialMode(2.0, 0, 0), ones, rule)
    with pytest.raises(DomainError):
        radial_overlap(RadialMode(1.0, 1, 0), RadialMode(1.0, 1, 1), ones, rule)


def test_rule_invariants():
    rule = gauss_laguerre_rule(1.5, 40)
    assert np.all(rule.weights > 0)
    assert np.all(np.diff(rule.nodes) > 0)
    # exactness: integrate rho^(2k) e^(-b rho^2/2) rho drho = k! (2/b)^k / b... check k=3
    b = 1.5
    k = 3
    val = np.dot(rule.weights, rule.nodes ** (2 * k) * np.exp(-b * rule.nodes**2 / 2))
    exact = math.factorial(k) * (2.0 / b) ** k / b
    assert val == pytest.approx(exact, rel=1e-13)
    with pytest.raises(DomainError):
        gauss_laguerre_rule(1.0, 1000)
