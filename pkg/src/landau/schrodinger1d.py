"""The longitudinal operator -d^2/dx^2 + v0: bound states, Jost solutions,
scattering coefficients, scattering states, and resolvent boundary values.

Discretization: symmetric three-point stencil on a uniform grid with Dirichlet
ends; eigenvalue errors are O(h^2) and Richardson extrapolation over (h, h/2)
removes the leading term.  All discrete inner products are h * sum over grid
values (ends carry zeros for Dirichlet eigenvectors).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import AccuracyError, DomainError
from .numutil import check_extrapolation, neville_to_zero, richardson_h2
from .potentials import Potential1D  # re-export: the type belongs to this layer

__all__ = [
    "Grid1D",
    "Potential1D",
    "BoundState",
    "ScatteringSolution",
    "hamiltonian_tridiagonal",
    "bound_states",
    "richardson_ground_state",
    "jost_solutions",
    "scattering_state",
    "limiting_resolvent",
    "default_delta_schedule",
]

_TAIL_FRACTION = 1e-8  # pre: |v0| at the grid ends relative to max|v0|


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of n points covering [x_min, x_max] inclusive."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (self.x_min < 0.0 < self.x_max):
            raise DomainError("grid must straddle the origin: x_min < 0 < x_max")
        if self.n < 3:
            raise DomainError("grid needs at least 3 points")

    @property
    def h(self):
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def points(self):
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def interior(self):
        return self.points[1:-1]

    def refined(self):
        """Same interval at half the spacing (for Richardson pairs)."""
        return Grid1D(self.x_min, self.x_max, 2 * self.n - 1)


@dataclass(frozen=True)
class BoundState:
    """Negative eigenvalue and normalized real eigenvector of the longitudinal operator."""

    lam: float
    psi: np.ndarray  # samples on the full grid, zeros at the Dirichlet ends
    grid: Grid1D

    def __post_init__(self):
        if not self.lam < 0:
            raise DomainError("bound-state eigenvalue must be negative")


@dataclass(frozen=True)
class ScatteringSolution:
    """Jost solutions at momentum k with transmission and reflection amplitudes.

    y1(x;k) ~ e^(ikx) as x -> +inf and y2(x;k) ~ e^(-ikx) as x -> -inf; their
    matching in the right tail reads y2 = (1/T) y1(.;-k) + (R/T) y1(.;k).

    T and R are the *physical* (flux-normalized) transmission and reflection
    amplitudes for right incidence, so |T|^2 + |R|^2 = 1.  The matching
    coefficient 1/T is exposed as ``transition``; the Wronskian of (y1, y2)
    equals -2ik/T = -2ik * transition.  dy1/dy2 carry the first derivatives,
    so discrete Wronskians need no finite differencing.
    """

    k: float
    y1: np.ndarray
    y2: np.ndarray
    dy1: np.ndarray
    dy2: np.ndarray
    T: complex
    R: complex
    grid: Grid1D

    @property
    def transition(self):
        """Matching coefficient of y2 against y1(.;-k) (reciprocal transmission)."""
        return 1.0 / self.T

    @property
    def flux_defect(self):
        return abs(abs(self.T) ** 2 + abs(self.R) ** 2 - 1.0)

    def wronskian(self):
        """Pointwise W(y1, y2) = y1 y2' - y1' y2 (constant = -2ik/T for exact solutions)."""
        return self.y1 * self.dy2 - self.dy1 * self.y2


def hamiltonian_tridiagonal(v0, grid):
    """Interior three-point discretization: diagonal and off-diagonal arrays."""
    x = grid.interior
    h = grid.h
    d = 2.0 / h**2 + np.asarray(v0.evaluate(x), dtype=float)
    e = np.full(grid.n - 3, -1.0 / h**2)
    return d, e


def _check_tails(v0, grid, exc=DomainError):
    vals = np.abs(np.asarray(v0.evaluate(grid.points), dtype=float))
    vmax = vals.max()
    if vmax == 0.0:
        return
    if max(vals[0], vals[-1]) >= _TAIL_FRACTION * vmax:
        raise exc(
            "potential not negligible at the grid ends; widen the grid "
            f"(|v0(ends)|/max|v0| = {max(vals[0], vals[-1]) / vmax:.2e})"
        )


def bound_states(v0, grid, check_tails=True):
    """All negative eigenvalues of the discretized operator, sorted ascending.

    Returns an empty list when the discrete spectrum is empty (e.g. v0 = 0).
    ``check_tails=False`` skips the grid-width precondition (used for
    deliberately shifted potentials in diagnostics).
    """
    if check_tails:
        _check_tails(v0, grid)
    d, e = hamiltonian_tridiagonal(v0, grid)
    vmin = float(np.min(np.asarray(v0.evaluate(grid.interior), dtype=float)))
    lo = min(0.0, vmin) - 1.0
    w, v = eigh_tridiagonal(d, e, select="v", select_range=(lo, -1e-12))
    out = []
    h = grid.h
    for i in range(len(w)):
        psi_int = v[:, i]
        psi_int = psi_int / math.sqrt(h * float(np.dot(psi_int, psi_int)))
        if psi_int[int(np.argmax(np.abs(psi_int)))] < 0:
            psi_int = -psi_int
        psi = np.zeros(grid.n)
        psi[1:-1] = psi_int
        out.append(BoundState(lam=float(w[i]), psi=psi, grid=grid))
    return out


def richardson_ground_state(v0, grid, which=0):
    """Bound-state eigenvalue extrapolated over (h, h/2); O(h^4) accurate.

    Returns (lam_extrapolated, BoundState on the refined grid).
    """
    coarse = bound_states(v0, grid)
    fine = bound_states(v0, grid.refined())
    if which >= len(coarse) or which >= len(fine):
        raise DomainError(f"bound state #{which} not present on both grids")
    lam = richardson_h2(coarse[which].lam, fine[which].lam)
    return float(lam), fine[which]


def _march_envelope(vp, vm, vmid, h, k, sigma, backward):
    """RK4 on the envelope u of y = e^(sigma i k x) u, i.e. p' = v u - 2 sigma i k p.

    vp/vm are potential samples nudged forward/backward off the nodes (so that
    piecewise potentials with jumps at nodes are sampled inside the step), vmid
    at midpoints.  Returns (u, p) arrays over the full grid.
    """
    n = len(vp)
    u = np.empty(n, dtype=complex)
    p = np.empty(n, dtype=complex)
    c = -2j * sigma * k
    if backward:
        rng = range(n - 1, 0, -1)
        dh = -h
        u[-1], p[-1] = 1.0, 0.0
    else:
        rng = range(0, n - 1)
        dh = h
        u[0], p[0] = 1.0, 0.0
    for i in rng:
        j = i - 1 if backward else i + 1
        v_start = vm[i] if backward else vp[i]
        v_mid = vmid[min(i, j)]
        v_end = vp[j] if backward else vm[j]
        ui, pi = u[i], p[i]
        k1u, k1p = pi, v_start * ui + c * pi
        au, ap = ui + 0.5 * dh * k1u, pi + 0.5 * dh * k1p
        k2u, k2p = ap, v_mid * au + c * ap
        au, ap = ui + 0.5 * dh * k2u, pi + 0.5 * dh * k2p
        k3u, k3p = ap, v_mid * au + c * ap
        au, ap = ui + dh * k3u, pi + dh * k3p
        k4u, k4p = ap, v_end * au + c * ap
        u[j] = ui + dh / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        p[j] = pi + dh / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return u, p


def jost_solutions(v0, k, grid):
    """Jost solutions y1, y2 at momentum k > 0 with physical T(k), R(k).

    The oscillation e^(+-ikx) is factored out analytically; RK4 integrates only
    the smooth envelopes, so accuracy is uniform in k.  The matching
    coefficients come from constant Wronskians: W(y1, y2) = -2ik/T and
    W(y1(.;-k), y2) = 2ik R/T, with y1(.;-k) = conj(y1(.;k)) for real
    potentials.
    """
    if not k > 0:
        raise DomainError("momentum k must be positive")
    _check_tails(v0, grid, exc=AccuracyError)  # tail residual spoils the matching
    x = grid.points
    h = grid.h
    nudge = 1e-9 * h
    vp = np.asarray(v0.evaluate(x + nudge), dtype=float)
    vm = np.asarray(v0.evaluate(x - nudge), dtype=float)
    vmid = np.asarray(v0.evaluate(x[:-1] + 0.5 * h), dtype=float)

    u1, p1 = _march_envelope(vp, vm, vmid, h, k, sigma=+1, backward=True)
    u2, p2 = _march_envelope(vp, vm, vmid, h, k, sigma=-1, backward=False)

    phase_p = np.exp(1j * k * x)
    phase_m = np.exp(-1j * k * x)
    y1 = phase_p * u1
    dy1 = phase_p * (1j * k * u1 + p1)
    y2 = phase_m * u2
    dy2 = phase_m * (-1j * k * u2 + p2)

    mid = grid.n // 2
    w12 = y1[mid] * dy2[mid] - dy1[mid] * y2[mid]
    trans = w12 / (-2j * k)  # matching coefficient 1/T
    wcross = np.conj(y1[mid]) * dy2[mid] - np.conj(dy1[mid]) * y2[mid]
    refl = wcross / (2j * k)  # matching coefficient R/T

    if abs(trans) < 1e-12:
        raise AccuracyError(f"degenerate Jost matching at k={k}")
    T = 1.0 / trans
    R = refl * T
    sol = ScatteringSolution(k=k, y1=y1, y2=y2, dy1=dy1, dy2=dy2, T=T, R=R, grid=grid)
    if sol.flux_defect > 1e-4:
        raise AccuracyError(
            f"flux conservation violated at k={k}: |T|^2+|R|^2 - 1 = {sol.flux_defect:.2e}"
        )
    return sol


def scattering_state(v0, E, l, grid):
    """Scattering state Psi_l(x; E) = y_l(x; sqrt(E)) / (sqrt(4 pi sqrt(E)) * transition).

    These are the unit-incidence physical scattering states over sqrt(4 pi k);
    the boundary values of the resolvent satisfy
    Im <x>^-s R(E+i0) <x>^-s = pi * sum_l |Psi_l><Psi_l| sandwiched by the weights.
    """
    if not E > 0:
        raise DomainError("energy E must be positive")
    if l not in (1, 2):
        raise DomainError("branch index l must be 1 or 2")
    k = math.sqrt(E)
    sol = jost_solutions(v0, k, grid)
    y = sol.y1 if l == 1 else sol.y2
    return y * sol.T / math.sqrt(4.0 * math.pi * k)


def default_delta_schedule(j_max=8, delta0=0.1):
    """delta_j = delta0 * 2^(-j), j = 0..j_max."""
    return delta0 * 0.5 ** np.arange(j_max + 1)


def limiting_resolvent(v0, E, f, g, grid, s=1.0, deltas=None):
    """Boundary value <(H - E - i0)^(-1) f, g> by extrapolation over a delta sequence.

    f, g are samples on the full grid decaying like <x>^(-s), s > 1/2; the inner
    product is linear in the first slot.  The delta values must stay a few grid
    level spacings above zero for the finite box to mimic the half-line continuum;
    the default schedule suits the default grids.
    """
    if not E > 0:
        raise DomainError("limiting absorption requires E > 0")
    if not s > 0.5:
        raise DomainError("weight exponent s must exceed 1/2")
    if deltas is None:
        deltas = default_delta_schedule()
    deltas = np.asarray(deltas, dtype=float)
    if np.any(np.diff(deltas) >= 0) or np.any(deltas <= 0):
        raise DomainError("delta schedule must be positive and strictly decreasing")
    d, e = hamiltonian_tridiagonal(v0, grid)
    f_int = np.asarray(f)[1:-1]
    g_int = np.asarray(g)[1:-1]
    h = grid.h
    n_int = len(d)
    ab = np.zeros((3, n_int), dtype=complex)
    vals = []
    for delta in deltas:
        ab[0, 1:] = e
        ab[1, :] = d - (E + 1j * delta)
        ab[2, :-1] = e
        u = solve_banded((1, 1), ab, f_int)
        vals.append(h * np.dot(u, np.conj(g_int)))
    value, _ = neville_to_zero(deltas, vals)
    # residual trail of the Neville tableau: successive extrapolants must settle
    trail = [neville_to_zero(deltas[: j + 1], vals[: j + 1])[0] for j in range(1, len(deltas))]
    corrections = np.abs(np.diff(np.asarray(trail)))
    check_extrapolation(corrections, context="limiting absorption delta -> 0")
    return value
