"""Gauss-Legendre quadrature helpers on radial grids."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the n-point rule on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _segment_rule(f, a, b, n):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ w)


def segment_integrals(f, edges, n=8, rtol=1e-13, atol=1e-300, max_depth=30):
    """Integral of a vectorised ``f`` over each ``[edges[i], edges[i+1]]``.

    Each segment is bisected until an n-point rule and its two-half
    refinement agree to ``atol + rtol*|I_segment|``.  The absolute floor is
    raised to ``rtol * 1e-3 * sum|I_segment|`` so segments where the
    integrand cancels to roundoff are not bisected forever.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    coarse = _segment_rule(f, a, b, n)
    atol = max(atol, 1e-3 * rtol * float(np.sum(np.abs(coarse))))
    return _refine(f, a, b, coarse, n, rtol, atol, max_depth)


def _refine(f, a, b, coarse, n, rtol, atol, depth):
    m = 0.5 * (a + b)
    left = _segment_rule(f, a, m, n)
    right = _segment_rule(f, m, b, n)
    fine = left + right
    bad = np.abs(fine - coarse) > atol + rtol * np.abs(fine)
    if depth > 0 and np.any(bad):
        idx = np.nonzero(bad)[0]
        fine = fine.copy()
        fine[idx] = _refine(f, a[idx], m[idx], left[idx], n, rtol, atol, depth - 1) + _refine(
            f, m[idx], b[idx], right[idx], n, rtol, atol, depth - 1
        )
    return fine


def cumulative(f, x, n=8, rtol=1e-13, atol=1e-300):
    """C[i] = integral of f from x[0] to x[i] for increasing x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if x.size > 1:
        out[1:] = np.cumsum(segment_integrals(f, x, n=n, rtol=rtol, atol=atol))
    return out


def integrate(f, lo, hi, breakpoints=(), n=8, rtol=1e-13, atol=1e-300):
    """Integral of f over [lo, hi], splitting at any breakpoints inside."""
    if hi <= lo:
        return 0.0
    bp = np.asarray(breakpoints, dtype=float)
    bp = bp[(bp > lo) & (bp < hi)]
    edges = np.unique(np.concatenate(([lo], bp, [hi])))
    return float(np.sum(segment_integrals(f, edges, n=n, rtol=rtol, atol=atol)))


def power_tail(r0, r1, F0, F1):
    """Integral over (0, r0) of F assuming F ~ C r^k fitted through two nodes.

    Returns ``inf`` if the fitted exponent is not integrable at the origin.
    """
    if F0 == 0.0:
        return 0.0
    if F0 * F1 <= 0.0:
        return 0.0
    k = np.log(F1 / F0) / np.log(r1 / r0)
    if k <= -1.0:
        return np.inf
    return F0 * r0 / (k + 1.0)
