"""Small numerical helpers: extrapolation and stable sums."""

import numpy as np

from .errors import AccuracyError


def neville_to_zero(xs, ys):
    """Polynomial extrapolation of samples (xs, ys) to x = 0 (Neville tableau).

    Returns (value, residual) where residual is the magnitude of the last
    tableau correction, a standard error surrogate for the extrapolated limit.
    """
    xs = np.asarray(xs, dtype=float)
    t = np.asarray(ys, dtype=complex).copy()
    n = len(xs)
    if n != len(t) or n < 2:
        raise ValueError("need at least two samples with matching abscissae")
    prev_top = t[0]
    for j in range(1, n):
        for i in range(n - j):
            t[i] = (xs[i + j] * t[i] - xs[i] * t[i + 1]) / (xs[i + j] - xs[i])
        prev_top, last = t[0], abs(t[0] - prev_top)
    return t[0], last


def richardson_h2(coarse, fine):
    """Eliminate the O(h^2) error from a pair computed at spacings h and h/2."""
    coarse = np.asarray(coarse)
    fine = np.asarray(fine)
    out = (4.0 * fine - coarse) / 3.0
    if out.ndim == 0:
        return out[()]
    return out


def monotone_tail(values, slack=3.0):
    """True when |values| keeps settling over its last three entries.

    A step may grow by at most ``slack``: once corrections reach the noise
    floor they jitter, and only a genuine blow-up should be flagged.
    """
    v = np.abs(np.asarray(values, dtype=float))
    if len(v) < 3:
        return True
    return v[-1] <= v[-2] * slack and v[-2] <= v[-3] * slack


def check_extrapolation(corrections, context=""):
    """Raise AccuracyError when extrapolation corrections stop shrinking."""
    if not monotone_tail(corrections):
        raise AccuracyError(
            f"extrapolation residuals not monotone{': ' + context if context else ''}: "
            f"{np.asarray(corrections)[-3:]}"
        )
