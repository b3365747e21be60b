"""The smooth compactly supported bump b(x) = exp(1 - 1/(1 - x^2)) and
its primitives, shared by test functions and generator constructions.

b has peak value 1 at x = 0, vanishes with all derivatives at x = +-1.
"""

from functools import lru_cache

import numpy as np
from scipy.interpolate import BPoly

from .quadrature import cumulative

TABLE_SIZE = 4001


def bump(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - xi * xi))
    return out


def bump_d1(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    q = 1.0 - xi * xi
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * xi / q**2)
    return out


def bump_d2(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    q = 1.0 - xi * xi
    d1 = -2.0 * xi / q**2
    d2 = -(2.0 + 6.0 * xi * xi) / q**3
    out[inside] = np.exp(1.0 - 1.0 / q) * (d1 * d1 + d2)
    return out


def bump_d3(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    q = 1.0 - xi * xi
    d1 = -2.0 * xi / q**2
    d2 = -(2.0 + 6.0 * xi * xi) / q**3
    d3 = -(24.0 * xi + 24.0 * xi**3) / q**4
    out[inside] = np.exp(1.0 - 1.0 / q) * (d1**3 + 3.0 * d1 * d2 + d3)
    return out


@lru_cache(maxsize=None)
def _tables():
    # cosine-spaced nodes cluster where b flattens out
    x = -np.cos(np.linspace(0.0, np.pi, TABLE_SIZE))
    x[0], x[-1] = -1.0, 1.0
    b, db = bump(x), bump_d1(x)
    prims, totals = [], []
    for k in range(3):
        P = cumulative(lambda t, k=k: t**k * bump(t), x, rtol=1e-13, atol=1e-22)
        dk = k * x ** max(k - 1, 0) * b if k else 0.0
        table = np.column_stack((P, x**k * b, dk + x**k * db))
        prims.append(BPoly.from_derivatives(x, table, extrapolate=False))
        totals.append(float(P[-1]))
    return prims, totals


def bump_integral():
    """I_b = integral of b over [-1, 1]."""
    return _tables()[1][0]


def _moment(x, k):
    prims, totals = _tables()
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, totals[k], 0.0)
    inside = np.abs(x) < 1.0
    out[inside] = prims[k](x[inside])
    return out


def bump_primitive(x):
    """P(x) = integral of b from -1 to x (0 left of -1, I_b right of 1)."""
    return _moment(x, 0)


def bump_moment_primitive(x, k=1):
    """P_k(x) = integral of t^k b(t) from -1 to x."""
    return _moment(x, k)
