import math

import numpy as np
import pytest

from landau.errors import AccuracyError, DomainError
from landau.numutil import richardson_h2
from landau.potentials import sech2, square_well, zero_potential
from landau.schrodinger1d import (
    Grid1D,
    bound_states,
    jost_solutions,
    limiting_resolvent,
    richardson_ground_state,
    scattering_state,
)

GRID = Grid1D(-20.0, 20.0, 4001)


def test_grid_invariants():
    with pytest.raises(DomainError):
        Grid1D(1.0, 2.0, 100)
    with pytest.raises(DomainError):
        Grid1D(-1.0, 1.0, 2)
    g = Grid1D(-2.0, 2.0, 5)
    assert g.h == 1.0
    assert g.refined().n == 9


def test_free_potential_no_bound_states():
    assert bound_states(zero_potential(), GRID) == []


def test_poschl_teller_bound_state():
    # analytic reflectionless well: lambda = -1, psi proportional to sech
    lam, state = richardson_ground_state(sech2(), GRID)
    assert abs(lam + 1.0) < 1e-6
    x = state.grid.points
    assert np.max(np.abs(state.psi - 1 / np.cosh(x) / math.sqrt(2.0))) < 1e-5
    # discrete normalization
    assert abs(state.grid.h * np.dot(state.psi, state.psi) - 1.0) < 1e-12


def test_bound_state_h2_convergence():
    # |lambda(h) - lambda(h/2)| = O(h^2): ratio across two refinements ~ 4
    lam_h = bound_states(sech2(), GRID)[0].lam
    lam_h2 = bound_states(sech2(), GRID.refined())[0].lam
    lam_h4 = bound_states(sech2(), GRID.refined().refined())[0].lam
    r = (lam_h - lam_h2) / (lam_h2 - lam_h4)
    assert 3.7 < r < 4.3


def test_square_well_transcendental_oracle():
    # even ground state of v = -V0 on |x|<a: sqrt(V0+lam) tan(a sqrt(V0+lam)) = sqrt(-lam)
    v0, a = 0.5, 1.0
    def mismatch(lam):
        kin = math.sqrt(v0 + lam)
        return kin * math.tan(a * kin) - math.sqrt(-lam)
    lo, hi = -v0 + 1e-9, -1e-9
    for _ in range(200):  # bisection
        mid = 0.5 * (lo + hi)
        if mismatch(lo) * mismatch(mid) <= 0:
            hi = mid
        else:
            lo = mid
    lam_exact = 0.5 * (lo + hi)
    # kappa = sqrt(-lam) ~ 0.39: the box must be wide enough that the Dirichlet
    # truncation error e^(-2 kappa L) stays below the h^4 extrapolation level
    grid = Grid1D(-30.0, 30.0, 12001)  # well edges fall on nodes
    lam, _ = richardson_ground_state(square_well(v0, a), grid)
    assert abs(lam - lam_exact) < 1e-7
    assert len(bound_states(square_well(v0, a), grid)) == 1


def test_grid_too_narrow_rejected():
    with pytest.raises(DomainError):
        bound_states(sech2(), Grid1D(-4.0, 4.0, 200))


def test_jost_free():
    sol = jost_solutions(zero_potential(), 1.3, GRID)
    assert sol.T == pytest.approx(1.0, abs=1e-12)
    assert abs(sol.R) < 1e-12
    x = GRID.points
    assert np.allclose(sol.y1, np.exp(1.3j * x), atol=1e-10)


def test_jost_reflectionless():
    for k in (0.5, 1.0, 2.0, 4.0):
        sol = jost_solutions(sech2(), k, GRID)
        assert abs(sol.R) < 1e-6
        assert abs(abs(sol.T) - 1.0) < 1e-6
        # analytic transmission for the -2 sech^2 well: t(k) = (1 - ik)/(-(1 + ik)) inverted
        t_exact = 1.0 / (-(1 + 1j * k) / (1 - 1j * k))
        assert sol.T == pytest.approx(t_exact, abs=1e-8)


def test_flux_conservation_all_builtins():
    grid = Grid1D(-20.0, 20.0, 8001)
    for v in (sech2(), square_well(0.5, 1.0), zero_potential()):
        for k in (0.3, 0.7, 1.0, 2.5, 5.0):
            sol = jost_solutions(v, k, grid)
            assert sol.flux_defect < 1e-6, (v.name, k, sol.flux_defect)


def test_square_well_transfer_matrix_oracle():
    # piecewise-exact amplitudes for the finite well (symmetric: same moduli both incidences)
    v0, a = 0.5, 1.0
    def exact(k):
        kp = math.sqrt(k * k + v0)
        den = np.cos(2 * kp * a) - 0.5j * (kp / k + k / kp) * np.sin(2 * kp * a)
        t = np.exp(-2j * k * a) / den
        r = np.exp(-2j * k * a) * (-0.5j) * (kp / k - k / kp) * np.sin(2 * kp * a) / den
        return t, r
    grid = Grid1D(-20.0, 20.0, 8001)
    for k in (0.3, 1.0, 3.0):
        t, r = exact(k)
        sol = jost_solutions(square_well(v0, a), k, grid)
        assert abs(abs(sol.T) - abs(t)) < 1e-8
        assert abs(abs(sol.R) - abs(r)) < 1e-8


def test_wronskian_constancy_and_value():
    sol = jost_solutions(sech2(), 1.0, GRID)
    w = sol.wronskian()[200:-200]
    wmid = w[len(w) // 2]
    assert np.max(np.abs(w - wmid)) / abs(wmid) < 1e-8
    # W(y1, y2) = -2ik * transition
    assert wmid == pytest.approx(-2j * 1.0 * sol.transition, rel=1e-10)


def test_transition_nonzero_over_k_sweep():
    for k in np.geomspace(0.05, 10.0, 12):
        sol = jost_solutions(sech2(), float(k), GRID)
        assert abs(sol.transition) > 0.0
        assert abs(sol.T) > 1e-6


def test_jost_domain_errors():
    with pytest.raises(DomainError):
        jost_solutions(sech2(), -1.0, GRID)
    with pytest.raises(DomainError):
        scattering_state(sech2(), -2.0, 1, GRID)
    with pytest.raises(DomainError):
        scattering_state(sech2(), 1.0, 3, GRID)


def test_scattering_state_free():
    x = GRID.points
    E = 2.0
    psi = scattering_state(zero_potential(), E, 1, GRID)
    ref = np.exp(1j * math.sqrt(E) * x) / math.sqrt(4 * math.pi * math.sqrt(E))
    assert np.allclose(psi, ref, atol=1e-10)


def test_scattering_state_parts_nonvanishing():
    for l in (1, 2):
        psi = scattering_state(sech2(), 1.0, l, GRID)
        assert np.max(np.abs(psi.real)) > 1e-3
        assert np.max(np.abs(psi.imag)) > 1e-3


def test_scattering_state_constant_modulus_tails():
    # |T| = 1 for the reflectionless well: |Psi_1| constant in both tails
    psi = scattering_state(sech2(), 1.0, 1, GRID)
    for sl in (slice(0, 400), slice(-400, None)):
        mod = np.abs(psi[sl])
        assert np.max(mod) - np.min(mod) < 1e-8


LAP_GRID = Grid1D(-3000.0, 3000.0, 120001)
LAP_DELTAS = 0.1 * 0.5 ** np.arange(5)


def _bump(grid, center=0.31):
    x = grid.points
    f = np.exp(-((x - center) ** 2)) / np.sqrt(1 + x**2)
    return f / math.sqrt(grid.h * np.dot(f, f))


def test_limiting_resolvent_free_green_oracle():
    # oracle: quadrature of the outgoing free kernel +i e^(ik|x-x'|)/(2k)
    E = 1.0
    vals = []
    for g in (LAP_GRID, LAP_GRID.refined()):
        vals.append(limiting_resolvent(zero_potential(), E, _bump(g), _bump(g), g,
                                       deltas=LAP_DELTAS))
    val = richardson_h2(vals[0], vals[1])
    xs = np.linspace(-9.0, 9.0, 2401)
    hh = xs[1] - xs[0]
    ff = np.exp(-((xs - 0.31) ** 2)) / np.sqrt(1 + xs**2)
    ff /= math.sqrt(hh * np.dot(ff, ff))
    kern = 1j * np.exp(1j * math.sqrt(E) * np.abs(xs[:, None] - xs[None, :])) / (2 * math.sqrt(E))
    oracle = hh * hh * np.einsum("i,ij,j->", ff, kern, ff)
    assert abs(val - oracle) / abs(oracle) < 1e-5
    assert val.imag > 0


def test_limiting_resolvent_positive_imaginary_part():
    for c in (-1.0, 0.0, 0.8):
        f = _bump(LAP_GRID, center=c)
        val = limiting_resolvent(sech2(), 1.0, f, f, LAP_GRID, deltas=LAP_DELTAS)
        assert val.imag > 0


def test_limiting_resolvent_rank_two():
    E = 1.0
    fam = [_bump(LAP_GRID, c) for c in (-1.2, -0.4, 0.3, 0.9, 1.7)]
    G = np.zeros((5, 5), complex)
    for i in range(5):
        for j in range(5):
            G[i, j] = limiting_resolvent(zero_potential(), E, fam[i], fam[j], LAP_GRID,
                                         deltas=LAP_DELTAS)
    im_part = (G - G.conj().T) / 2j
    sv = np.linalg.svd(im_part, compute_uv=False)
    assert sv[1] > 1e-2 * sv[0]       # genuinely rank >= 2
    assert sv[2] < 1e-6 * sv[0]       # and no more


def test_limiting_resolvent_bounded_on_compact_interval():
    f = _bump(LAP_GRID)
    vals = [abs(limiting_resolvent(sech2(), E, f, f, LAP_GRID, deltas=LAP_DELTAS))
            for E in (0.5, 0.8, 1.0, 1.5, 2.0)]
    assert max(vals) < 10.0


def test_limiting_resolvent_detects_unresolved_delta():
    # delta below the box level-spacing alias floor must be rejected, not returned
    f = _bump(LAP_GRID)
    with pytest.raises(AccuracyError):
        limiting_resolvent(zero_potential(), 1.0, f, f, LAP_GRID,
                           deltas=0.1 * 0.5 ** np.arange(9))


def test_jost_tail_residual_accuracy_error():
    # Jost matching on a too-narrow grid is an accuracy failure, not a usage one
    with pytest.raises(AccuracyError):
        jost_solutions(sech2(), 1.0, Grid1D(-4.0, 4.0, 400))
