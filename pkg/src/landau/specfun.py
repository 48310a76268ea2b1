"""Generalized Laguerre polynomials, Landau radial eigenfunctions, and radial quadrature.

Conventions. The transverse (Landau) eigenfunctions live in L^2(R_+; rho drho):

    phi_{q,m}(rho) = sqrt(2 q!/(q+m)! (b/2)^(m+1)) rho^m L_q^(m)(b rho^2/2) e^(-b rho^2/4),

for m >= 0, with H_perp^(m) phi_{q,m} = 2 b q phi_{q,m} and
int_0^inf phi_{q,m} phi_{q',m} rho drho = delta_{qq'}.  For m < 0 the same
eigenspace is spanned by phi_{q+m,-m}, and we *define* phi_{q,m} := phi_{q+m,-m},
which fixes the sign so that phi_{q,m}(rho) > 0 as rho -> 0+.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_laguerre

from .errors import DomainError

# Gauss-Laguerre total weights carry a factor e^{s_i}; beyond ~170 nodes the
# raw Christoffel weights underflow double precision.
_MAX_GL_NODES = 170


def m_minus(m):
    """Lower admissible Landau index for angular momentum m."""
    return max(0, -m)


@dataclass(frozen=True)
class RadialMode:
    """Landau quantum numbers (q, m) at field strength b > 0 (units hbar=1, 2m*=1)."""

    b: float
    q: int
    m: int

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"field strength must be positive, got b={self.b}")
        if self.q < m_minus(self.m):
            raise DomainError(
                f"Landau index q={self.q} below m_- = {m_minus(self.m)} for m={self.m}"
            )


def _laguerre_sum(q, m, s):
    """Direct evaluation of the finite sum defining L_q^(m); m may be negative."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for l in range(m_minus(m), q + 1):
        c = math.exp(
            gammaln(q + m + 1) - gammaln(m + l + 1) - gammaln(q - l + 1) - gammaln(l + 1)
        )
        out = out + c * (-s) ** l
    return out


def _laguerre_recurrence(q, m, s):
    """Upward three-term recurrence in the degree, m >= 0."""
    s = np.asarray(s, dtype=float)
    lk = np.ones_like(s)
    if q == 0:
        return lk
    lkp = 1.0 + m - s
    for n in range(1, q):
        lk, lkp = lkp, ((2 * n + m + 1 - s) * lkp - (n + m) * lk) / (n + 1.0)
    return lkp


def laguerre(q, m, s):
    """Generalized Laguerre polynomial L_q^(m)(s) for integer q >= m_-.

    Negative orders are reduced through L_q^(-k)(s) = (-s)^k (q-k)!/q! L_{q-k}^(k)(s).
    Degrees above 2 use the three-term recurrence; the alternating sum cancels badly.
    """
    if q < m_minus(m):
        raise DomainError(f"q={q} below m_- = {m_minus(m)} for m={m}")
    if m < 0:
        k = -m
        scale = math.exp(gammaln(q - k + 1) - gammaln(q + 1))
        s = np.asarray(s, dtype=float)
        val = scale * (-s) ** k * laguerre(q - k, k, s)
        return val if val.ndim else val[()]
    if q <= 2:
        val = _laguerre_sum(q, m, s)
    else:
        val = _laguerre_recurrence(q, m, s)
    return val if val.ndim else val[()]


def _phi_nonneg_m(b, q, m, rho):
    """phi_{q,m}(rho) for m >= 0 via an orthonormal-recurrence evaluation.

    The ground profile sqrt(2 (b/2)^(m+1)/m!) rho^m e^(-b rho^2/4) is assembled in
    log space, so large m stays finite; the degree recurrence runs on functions
    normalized to O(1) values.
    """
    rho = np.asarray(rho, dtype=float)
    s = 0.5 * b * rho**2
    log_g = (
        0.5 * math.log(2.0)
        + 0.5 * (m + 1) * math.log(0.5 * b)
        - 0.5 * s
        - 0.5 * gammaln(m + 1)
    )
    if m > 0:
        with np.errstate(divide="ignore"):
            # rho = 0 contributes log 0 = -inf, i.e. g = 0: correct for m > 0
            log_g = log_g + m * np.log(rho)
    g = np.exp(log_g)
    # f_n = sqrt(n! m!/(n+m)!) L_n^(m)(s), seeded with f_0 = 1
    fk = np.ones_like(s)
    fkp = (1.0 + m - s) / math.sqrt(1.0 + m)
    if q == 0:
        return g * fk
    for n in range(1, q):
        fk, fkp = (
            fkp,
            ((2 * n + m + 1 - s) * fkp - math.sqrt(n * (n + m)) * fk)
            / math.sqrt((n + 1.0) * (n + 1.0 + m)),
        )
    return g * fkp


def radial_eigenfunction(mode, rho):
    """Normalized radial eigenfunction phi_{q,m}(rho) of the fibered Landau operator.

    Normalization: int_0^inf phi^2 rho drho = 1.  Sign: phi > 0 as rho -> 0+.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("radial coordinate must be nonnegative")
    if mode.m < 0:
        val = _phi_nonneg_m(mode.b, mode.q + mode.m, -mode.m, rho)
    else:
        val = _phi_nonneg_m(mode.b, mode.q, mode.m, rho)
    return val if val.ndim else val[()]


@dataclass(frozen=True)
class RadialQuadrature:
    """Nodes/weights for int_0^inf f(rho) rho drho, exact on Landau-type integrands.

    ``exact_degree`` is the largest k such that rho^(2k) e^(-b rho^2/2) (equivalently
    s^k e^(-s) with s = b rho^2/2) is integrated exactly against rho drho.
    """

    b: float
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise DomainError("quadrature weights must be positive")
        d = np.diff(self.nodes)
        if np.any(self.nodes <= 0) or np.any(d <= 0):
            raise DomainError("quadrature nodes must be positive and increasing")

    def integrate(self, values):
        return float(np.dot(self.weights, values)) if np.asarray(values).ndim == 1 else (
            np.tensordot(self.weights, values, axes=(0, 0))
        )


def gauss_laguerre_rule(b, n_nodes):
    """Gauss-Laguerre rule in s = b rho^2/2 mapped to the rho half-line.

    Node counts above ~170 are rejected: the tail Christoffel weights underflow
    and the positivity invariant would silently break.  Large-m Toeplitz tails
    use the windowed integrator in toeplitz_ssf instead.
    """
    if not b > 0:
        raise DomainError("field strength must be positive")
    if n_nodes < 1 or n_nodes > _MAX_GL_NODES:
        raise DomainError(
            f"node count {n_nodes} outside [1, {_MAX_GL_NODES}]"
        )
    s, w = roots_laguerre(n_nodes)
    rho = np.sqrt(2.0 * s / b)
    weights = w * np.exp(s) / b
    return RadialQuadrature(b=b, nodes=rho, weights=weights, exact_degree=2 * n_nodes - 1)


def default_rule(b, q_max, m_max, deg_w=0):
    """Rule sized for products phi_{q,m} phi_{q',m} W with polynomial proxy degree deg_w."""
    n = 2 * (q_max + abs(m_max)) + deg_w + 8
    return gauss_laguerre_rule(b, min(n, _MAX_GL_NODES))


def radial_overlap(mode_a, mode_b, w, rule):
    """Quadrature evaluation of int_0^inf phi_a(rho) phi_b(rho) W(rho) rho drho.

    ``w`` is either a callable of rho or an array of samples at the rule nodes.
    """
    if mode_a.b != mode_b.b:
        raise DomainError(f"field strengths differ: {mode_a.b} vs {mode_b.b}")
    if mode_a.m != mode_b.m:
        raise DomainError(f"angular momenta differ: {mode_a.m} vs {mode_b.m}")
    if callable(w):
        wv = np.asarray(w(rule.nodes))
    else:
        wv = np.asarray(w)
        if wv.shape != rule.nodes.shape:
            raise DomainError("weight samples must align with the quadrature nodes")
    fa = radial_eigenfunction(mode_a, rule.nodes)
    fb = radial_eigenfunction(mode_b, rule.nodes)
    return float(np.dot(rule.weights, fa * fb * wv))
