"""Explicit semi-stable unbounded solutions built from a generator h >= 0.

Given h, let K = 1 + int_0^r h and Phi = r^(2s) K with s = sqrt((N-1)/(p-1)).
The profile is defined by Phi' = (N-1) r^(N-3) |u_r|^p, u_r < 0, u(1) = 0,
which gives the normal form

    u_r = -r^(-beta) phi,   phi = A^(1/p),   A = (r h + 2 s K)/(N-1),

with beta = (N - 2s - 2)/p.  All derivatives of u are evaluated from this
closed expression; the nonlinearity g is recovered as -Delta_p u along u.
"""

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BPoly

from .bumps import bump, bump_d1, bump_d2, bump_integral, bump_moment_primitive, bump_primitive
from .core import Regime, Sampled, critical_dimension, hardy_root, regime
from .errors import DomainError, RegimeError
from .profile import RadialGrid, RadialProfile, flux
from .quadrature import cumulative, integrate, power_tail
from .radial_solver import derivative_weights
from .stability import RandomBump, hardy_check, min_eigenvalue

FAMILY_R_MIN = 1e-8
MAX_TERMS = 64
AMPLIFY_CAP = 2.0**40
SUPPORT_NODES = 1024
MAX_SUPPORT_NODES = 2**15
DEFECT_TARGET = 4e-9


# --- generators -------------------------------------------------------------


class Generator:
    """A C^2 function h on (0, 1] with h', h'' and the primitive int_0^r h."""

    kind = "abstract"
    flags = {}

    def __call__(self, r):
        raise NotImplementedError

    def d1(self, r):
        raise NotImplementedError

    def d2(self, r):
        raise NotImplementedError

    def primitive(self, r):
        raise NotImplementedError

    def features(self):
        """Radii the sampling grid should resolve (centres and support edges)."""
        return np.empty(0)

    def supports(self):
        return []

    def describe(self):
        return {"kind": self.kind, "flags": dict(self.flags)}


class ZeroH(Generator):
    kind = "zero"
    flags = {"nonnegative": True, "L1": True, "increasing": True, "bounded_by_one": True,
             "concave_increments": True}

    def __call__(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    d1 = d2 = primitive = __call__


class PowerH(Generator):
    """h = c r^k with c >= 0, k >= 0."""

    kind = "scaled-power"

    def __init__(self, coeff, exponent):
        if coeff < 0.0 or exponent < 0.0:
            raise DomainError("scaled power needs c >= 0 and k >= 0")
        self.c, self.k = float(coeff), float(exponent)
        self.flags = {"nonnegative": True, "L1": True, "increasing": True,
                      "bounded_by_one": self.c <= 1.0,
                      "concave_increments": self.k <= 1.0 and (self.k >= 1.0 or self.c == 0.0)}

    def __call__(self, r):
        return self.c * np.asarray(r, dtype=float) ** self.k

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return self.c * self.k * r ** (self.k - 1.0) if self.k != 0.0 else np.zeros_like(r)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        if self.k in (0.0, 1.0):
            return np.zeros_like(r)
        return self.c * self.k * (self.k - 1.0) * r ** (self.k - 2.0)

    def primitive(self, r):
        return self.c * np.asarray(r, dtype=float) ** (self.k + 1.0) / (self.k + 1.0)

    def describe(self):
        return {"kind": self.kind, "c": self.c, "k": self.k, "flags": dict(self.flags)}


class _Localized(Generator):
    """Shared bookkeeping for sums of terms centred at r_n with half-widths d_n."""

    def __init__(self, centers, halfwidths):
        self.centers = np.asarray(centers, dtype=float)
        self.halfwidths = np.asarray(halfwidths, dtype=float)

    def _x(self, r):
        r = np.asarray(r, dtype=float)
        return (r[..., None] - self.centers) / self.halfwidths

    def features(self):
        c, d = self.centers, self.halfwidths
        if c.size == 0:
            return np.empty(0)
        inner = c[:, None] + d[:, None] * np.linspace(-1.0, 1.0, SUPPORT_NODES)[None, :]
        return np.concatenate((inner.ravel(), c))

    def supports(self):
        return [(float(c - d), float(c + d)) for c, d in zip(self.centers, self.halfwidths)]

    def describe(self):
        return {"kind": self.kind, "centers": self.centers.tolist(), "halfwidths": self.halfwidths.tolist(),
                "flags": dict(self.flags)}


class BumpSumH(_Localized):
    """h = sum_n y_n b((r - r_n)/d_n)."""

    kind = "bump-sum"

    def __init__(self, centers, halfwidths, heights):
        super().__init__(centers, halfwidths)
        self.heights = np.asarray(heights, dtype=float)
        if np.any(self.heights < 0.0):
            raise DomainError("bump heights must be nonnegative")
        self.flags = {"nonnegative": True, "L1": True, "increasing": self.heights.size == 0,
                      "bounded_by_one": bool(np.all(self.heights <= 1.0)), "concave_increments": False}

    def __call__(self, r):
        return bump(self._x(r)) @ self.heights

    def d1(self, r):
        return bump_d1(self._x(r)) @ (self.heights / self.halfwidths)

    def d2(self, r):
        return bump_d2(self._x(r)) @ (self.heights / self.halfwidths**2)

    def primitive(self, r):
        return bump_primitive(self._x(r)) @ (self.heights * self.halfwidths)

    def describe(self):
        d = super().describe()
        d["heights"] = self.heights.tolist()
        return d


def _step_integral(x):
    """int_{-1}^x P(t) dt = x P(x) - P1(x)."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= -1.0, 0.0, x * bump_primitive(x) - bump_moment_primitive(x))


class StepSumH(_Localized):
    """h = sum_n c_n P((r - r_n)/d_n) / I_b: smooth monotone steps of rise c_n.

    The slope at r_n is c_n / (d_n I_b).
    """

    kind = "step-sum"

    def __init__(self, centers, halfwidths, rises):
        super().__init__(centers, halfwidths)
        self.rises = np.asarray(rises, dtype=float)
        if np.any(self.rises < 0.0):
            raise DomainError("step rises must be nonnegative")
        self.flags = {"nonnegative": True, "L1": True, "increasing": True,
                      "bounded_by_one": bool(np.sum(self.rises) <= 1.0 + 1e-15), "concave_increments": False}

    def __call__(self, r):
        return bump_primitive(self._x(r)) @ (self.rises / bump_integral())

    def d1(self, r):
        return bump(self._x(r)) @ (self.rises / (bump_integral() * self.halfwidths))

    def d2(self, r):
        return bump_d1(self._x(r)) @ (self.rises / (bump_integral() * self.halfwidths**2))

    def primitive(self, r):
        return _step_integral(self._x(r)) @ (self.rises * self.halfwidths / bump_integral())

    def describe(self):
        d = super().describe()
        d["rises"] = self.rises.tolist()
        return d


class CapSumH(_Localized):
    """Concave increasing h with h(0) = 0 and h'' = -sum_n y_n b((r - r_n)/d_n).

    h' = sum_n y_n d_n (I_b - P(x_n)) >= 0 and ||h'||_inf = h'(0) = I_b sum_n y_n d_n.
    """

    kind = "cap-sum"

    def __init__(self, centers, halfwidths, curvatures):
        super().__init__(centers, halfwidths)
        self.curvatures = np.asarray(curvatures, dtype=float)
        if np.any(self.curvatures < 0.0):
            raise DomainError("cap curvatures must be nonnegative")
        self.flags = {"nonnegative": True, "L1": True, "increasing": True,
                      "bounded_by_one": bool(self.slope_bound <= 1.0), "concave_increments": True}

    @property
    def slope_bound(self):
        return float(bump_integral() * np.sum(self.curvatures * self.halfwidths))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x = self._x(r)
        w = self.curvatures * self.halfwidths
        return (bump_integral() * r[..., None] - self.halfwidths * _step_integral(x)) @ w

    def d1(self, r):
        return (bump_integral() - bump_primitive(self._x(r))) @ (self.curvatures * self.halfwidths)

    def d2(self, r):
        return -(bump(self._x(r)) @ self.curvatures)

    def primitive(self, r):
        r = np.asarray(r, dtype=float)
        x = self._x(r)
        R = np.where(x <= -1.0, 0.0, 0.5 * x**2 * bump_primitive(x) - x * bump_moment_primitive(x)
                     + 0.5 * bump_moment_primitive(x, 2))
        w = self.curvatures * self.halfwidths
        return (0.5 * bump_integral() * r[..., None] ** 2 - self.halfwidths**2 * R) @ w

    def describe(self):
        d = super().describe()
        d["curvatures"] = self.curvatures.tolist()
        d["slope_bound"] = self.slope_bound
        return d


class SampledC2H(Generator):
    """Quintic Hermite interpolation of (h, h', h'') samples on a grid."""

    kind = "sampled-c2"

    def __init__(self, r, values, d1, d2):
        r = np.asarray(r, dtype=float)
        if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0.0):
            raise DomainError("sample radii must be strictly increasing")
        if r[0] < 0.0 or r[-1] < 1.0:
            raise DomainError("samples must cover [r_0, 1] with r_0 >= 0")
        table = np.column_stack((values, d1, d2))
        self._poly = BPoly.from_derivatives(r, table, extrapolate=True)
        self._d1, self._d2 = self._poly.derivative(1), self._poly.derivative(2)
        self._prim = self._poly.antiderivative()
        self._r = r
        self._origin = float(self._prim(0.0))
        v = np.asarray(values, dtype=float)
        self.flags = {"nonnegative": bool(np.all(v >= 0.0)), "L1": True,
                      "increasing": bool(np.all(np.asarray(d1) >= 0.0)),
                      "bounded_by_one": bool(np.all(v <= 1.0)),
                      "concave_increments": bool(np.all(np.asarray(d2) <= 0.0))}

    def __call__(self, r):
        return self._poly(r)

    def d1(self, r):
        return self._d1(r)

    def d2(self, r):
        return self._d2(r)

    def primitive(self, r):
        return self._prim(r) - self._origin

    def features(self):
        return self._r


class SumH(Generator):
    kind = "sum"

    def __init__(self, *parts):
        self.parts = parts
        self.flags = {k: all(part.flags.get(k, False) for part in parts)
                      for k in ("nonnegative", "L1", "increasing", "concave_increments")}
        self.flags["bounded_by_one"] = False

    def __call__(self, r):
        return sum(part(r) for part in self.parts)

    def d1(self, r):
        return sum(part.d1(r) for part in self.parts)

    def d2(self, r):
        return sum(part.d2(r) for part in self.parts)

    def primitive(self, r):
        return sum(part.primitive(r) for part in self.parts)

    def features(self):
        return np.concatenate([part.features() for part in self.parts] + [np.empty(0)])

    def supports(self):
        return [s for part in self.parts for s in part.supports()]

    def describe(self):
        return {"kind": self.kind, "parts": [part.describe() for part in self.parts]}


def sample_flags(h, r):
    """Class flags measured on sample radii."""
    v, d1, d2 = h(r), h.d1(r), h.d2(r)
    return {"nonnegative": bool(np.all(v >= 0.0)), "increasing": bool(np.all(d1 >= 0.0)),
            "bounded_by_one": bool(np.all(v <= 1.0)), "concave_increments": bool(np.all(d2 <= 0.0)),
            "L1": bool(np.isfinite(integrate(h, float(r[0]), 1.0, breakpoints=h.features())))}


# --- Phi and the profile ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhiSamples:
    r: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    primitive: np.ndarray
    primitive_mismatch: float


def _merged_supports(h):
    spans = sorted(h.supports())
    out = []
    for lo, hi in spans:
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def _grid_for(h, r_min=FAMILY_R_MIN, counts=None):
    """Geometric grid whose nodes inside each support of h are replaced by a
    uniform block, so difference stencils never straddle two interleaved lattices."""
    spans = _merged_supports(h)
    counts = counts or [SUPPORT_NODES] * len(spans)
    nodes = RadialGrid.geometric(r_min=r_min).nodes
    extra = np.asarray(h.features(), dtype=float)
    blocks = []
    for (lo, hi), n in zip(spans, counts):
        lo, hi = max(lo, r_min), min(hi, 1.0)
        if hi <= lo:
            continue
        block = np.linspace(lo, hi, n + 1)
        pad = 0.5 * (block[1] - block[0])
        nodes = nodes[(nodes < lo - pad) | (nodes > hi + pad)]
        extra = extra[(extra < lo - pad) | (extra > hi + pad)]
        blocks.append(block)
    # features of unlocalized parts (sampled tables) are merged as they are
    nodes = np.unique(np.concatenate([nodes, extra, [r_min, 1.0]] + blocks))
    nodes = nodes[(nodes >= r_min) & (nodes <= 1.0)]
    keep = np.concatenate(([True], np.diff(nodes) > 1e-14 * nodes[1:]))
    keep[-1] = True
    nodes = nodes[keep]
    nodes[-1] = 1.0
    return RadialGrid(nodes)


def _flux_defect(fields, r):
    """|w' + r^(N-1) g(u)| with w' by 5-point differences and g in closed form."""
    N, p = fields.N, fields.p
    w = flux(r, fields.derivatives(r)[0], N, p)
    idx, wts = derivative_weights(r)
    return np.abs(np.sum(wts * w[idx], axis=1) + r ** (N - 1) * fields.g_along(r)[0])


def _resolved_grid(h, N, p, r_min=FAMILY_R_MIN):
    """Double the nodes of every support block whose flux defect exceeds DEFECT_TARGET
    while doubling still halves it."""
    spans = _merged_supports(h)
    counts = [SUPPORT_NODES] * len(spans)
    last = [math.inf] * len(spans)
    fields = FamilyFields(h, N, p)
    while True:
        grid = _grid_for(h, r_min, counts)
        if not spans:
            return grid
        r = grid.nodes
        defect = _flux_defect(fields, r)
        grow = False
        for k, (lo, hi) in enumerate(spans):
            margin = 0.1 * (hi - lo)
            near = (r >= lo - margin) & (r <= hi + margin)
            worst = float(np.max(defect[near])) if np.any(near) else 0.0
            # stop once doubling no longer helps: the defect is then not from this block
            if worst > DEFECT_TARGET and worst < 0.5 * last[k] and counts[k] < MAX_SUPPORT_NODES:
                counts[k] *= 2
                grow = True
            last[k] = worst
        if not grow:
            return grid


def build_phi(h, N, p, grid=None):
    """Phi = r^(2s)(1 + H) and Phi' on the grid, H = int_0^r h by adaptive quadrature."""
    if N < critical_dimension(p):
        warnings.warn(f"N={N} is below N_c(p)={critical_dimension(p):.6g}; the family is not unbounded there",
                      RuntimeWarning, stacklevel=2)
    grid = grid or _grid_for(h)
    r = grid.nodes
    hv = np.asarray(h(r), dtype=float)
    if np.any(hv < 0.0):
        i = int(np.nonzero(hv < 0.0)[0][0])
        raise DomainError(f"generator is negative at r = {r[i]:.6g}")
    s = hardy_root(N, p)
    body = cumulative(h, r, rtol=1e-13)
    tail = power_tail(r[0], r[1], float(hv[0]), float(hv[1])) if hv[0] > 0.0 else 0.0
    H = tail + body
    exact = np.asarray(h.primitive(r), dtype=float)
    mismatch = float(np.max(np.abs(H - exact)))
    K = 1.0 + H
    phi = r ** (2.0 * s) * K
    dphi = r ** (2.0 * s) * hv + 2.0 * s * r ** (2.0 * s - 1.0) * K
    return PhiSamples(r=r, phi=phi, phi_prime=dphi, primitive=H, primitive_mismatch=mismatch)


class FamilyFields:
    """Closed-form u_r, u_rr, u_rrr, Phi, Phi' and recovered g, g' for a generator."""

    def __init__(self, h, N, p):
        self.h, self.N, self.p = h, N, p
        self.s = hardy_root(N, p)
        self.beta = (N - 2.0 * self.s - 2.0) / p

    def _A(self, r):
        h, N, s = self.h, self.N, self.s
        hv, d1, d2 = h(r), h.d1(r), h.d2(r)
        K = 1.0 + h.primitive(r)
        A = (r * hv + 2.0 * s * K) / (N - 1.0)
        A1 = ((1.0 + 2.0 * s) * hv + r * d1) / (N - 1.0)
        A2 = ((2.0 + 2.0 * s) * d1 + r * d2) / (N - 1.0)
        return A, A1, A2

    def normal_form(self, r):
        """phi, phi', phi'' with u_r = -r^(-beta) phi."""
        r = np.asarray(r, dtype=float)
        p = self.p
        A, A1, A2 = self._A(r)
        phi = A ** (1.0 / p)
        d1 = A1 * A ** (1.0 / p - 1.0) / p
        d2 = A2 * A ** (1.0 / p - 1.0) / p + (1.0 / p) * (1.0 / p - 1.0) * A ** (1.0 / p - 2.0) * A1**2
        return phi, d1, d2

    def derivatives(self, r):
        r = np.asarray(r, dtype=float)
        b = self.beta
        phi, d1, d2 = self.normal_form(r)
        rb = r**-b
        u_r = -rb * phi
        u_rr = b * rb / r * phi - rb * d1
        u_rrr = -b * (b + 1.0) * rb / r**2 * phi + 2.0 * b * rb / r * d1 - rb * d2
        return u_r, u_rr, u_rrr

    def speed(self, r):
        return -self.derivatives(r)[0]

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (2.0 * self.s) * (1.0 + self.h.primitive(r))

    def phi_prime(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (2.0 * self.s) * self.h(r) + 2.0 * self.s * r ** (2.0 * self.s - 1.0) * (1.0 + self.h.primitive(r))

    def g_along(self, r):
        """g(u(r)) = |u_r|^(p-2) [ (N-1)|u_r|/r - (p-1) u_rr ] and g'(u(r)) = (dg/dr)/u_r."""
        r = np.asarray(r, dtype=float)
        N, p = self.N, self.p
        u_r, u_rr, u_rrr = self.derivatives(r)
        v = -u_r
        dv = -u_rr
        bracket = (N - 1.0) * v / r - (p - 1.0) * u_rr
        g = v ** (p - 2.0) * bracket
        dbracket = (N - 1.0) * (dv / r - v / r**2) - (p - 1.0) * u_rrr
        dg = (p - 2.0) * v ** (p - 3.0) * dv * bracket + v ** (p - 2.0) * dbracket
        return g, dg / u_r


@dataclass(frozen=True, eq=False)
class FamilySolution:
    h: Generator
    N: int
    p: float
    phi: np.ndarray
    phi_prime: np.ndarray
    profile: RadialProfile
    fields: FamilyFields
    g_samples: np.ndarray = None
    gprime_samples: np.ndarray = None
    g_recovered: Sampled = None
    certificates: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)


def family_profile(h, N, p, r_min=FAMILY_R_MIN, grid=None):
    """Profile u with Phi' = (N-1) r^(N-3) |u_r|^p, u_r < 0 and u(1) = 0."""
    grid = grid or _resolved_grid(h, N, p, r_min)
    ph = build_phi(h, N, p, grid)
    fields = FamilyFields(h, N, p)
    r = grid.nodes
    u_r, u_rr, u_rrr = fields.derivatives(r)
    # u(r) = int_r^1 |u_r|; below the first node the integral is not needed
    C = cumulative(fields.speed, r, rtol=1e-13)
    u = C[-1] - C
    u[-1] = 0.0
    profile = RadialProfile(grid=grid, u=u, u_r=u_r, w=flux(r, u_r, N, p), N=N, p=p,
                            u_rr=u_rr, u_rrr=u_rrr, meta={"source": "family", "generator": h.describe()})
    return FamilySolution(h=h, N=N, p=p, phi=ph.phi, phi_prime=ph.phi_prime, profile=profile, fields=fields,
                          details={"primitive_mismatch": ph.primitive_mismatch})


def recover_g(solution):
    """Attach g(s) = -Delta_p u(u^{-1}(s)) sampled at s_i = u(r_i).

    g is evaluated from the closed-form derivatives; a 5-point difference of
    w is kept as a cross-check in ``details['g_fd_mismatch']``.
    """
    prof = solution.profile
    if np.any(np.diff(prof.u) >= 0.0):
        raise DomainError("u is not strictly decreasing; g cannot be recovered")
    r = prof.r
    g, gp = solution.fields.g_along(r)
    idx, wts = derivative_weights(r)
    g_fd = -np.sum(wts * prof.w[idx], axis=1) / r ** (prof.N - 1)
    scale = np.maximum(np.abs(g), 1.0)
    fd_mismatch = float(np.max(np.abs(g_fd - g) / scale))
    table = Sampled(prof.u[::-1], g[::-1])
    details = dict(solution.details)
    details["g_fd_mismatch"] = fd_mismatch
    return replace(solution, g_samples=g, gprime_samples=gp, g_recovered=table, details=details)


def nonlinearity_from_profile(profile):
    """g(s) = -Delta_p u at s = u(r) for any strictly decreasing profile.

    Uses the stored u_rr when available and 5-point differences of w
    otherwise.  Returns the node samples and a monotone interpolant in s.
    """
    if np.any(np.diff(profile.u) >= 0.0):
        raise DomainError("u is not strictly decreasing; g cannot be recovered")
    r, N, p = profile.r, profile.N, profile.p
    if profile.u_rr is not None:
        v = np.abs(profile.u_r)
        g = v ** (p - 2.0) * ((N - 1.0) * v / r - (p - 1.0) * profile.u_rr)
    else:
        idx, wts = derivative_weights(r)
        g = -np.sum(wts * profile.w[idx], axis=1) / r ** (N - 1)
    return g, Sampled(profile.u[::-1], g[::-1])


# --- certificates -----------------------------------------------------------


def _decade_increments(fields, lo_exp=-2, hi_exp=None, r_min=FAMILY_R_MIN):
    hi_exp = hi_exp if hi_exp is not None else int(round(math.log10(r_min)))
    radii = 10.0 ** np.arange(lo_exp, hi_exp - 1, -1, dtype=float)
    inc = []
    for a, b in zip(radii[1:], radii[:-1]):
        inc.append(integrate(fields.speed, a, b, breakpoints=np.geomspace(a, b, 17), rtol=1e-12))
    return radii, np.asarray(inc)


def verify_family(solution, n_random=40, seed=0, cut_radius=1e-4, mesh_count=400):
    """Fill the six certificates of a family solution.

    * w1p_finite: int_0^1 |u_r|^p r^(N-1) dr = int r^2 Phi' / (N-1) is finite;
    * unbounded_growth: the increment of u over the two deepest decades does not decay;
    * hardy_semistable: r Phi' >= 2 s Phi at every node and the generalized Hardy
      inequality holds for ``n_random`` random bumps;
    * eigen_semistable: the discrete pencil with the recovered g' is not unstable;
    * g_nonneg: -w is nondecreasing; g_monotone: g' >= 0 along u.
    """
    sol = solution if solution.g_samples is not None else recover_g(solution)
    prof, fields = sol.profile, sol.fields
    N, p = sol.N, sol.p
    r = prof.r
    s = fields.s
    certs = {}
    details = dict(sol.details)

    weight = np.abs(prof.u_r) ** p * r ** (N - 1)
    body = integrate(lambda t: np.abs(fields.derivatives(t)[0]) ** p * t ** (N - 1), r[0], 1.0,
                     breakpoints=np.concatenate((r[::8], sol.h.features())), rtol=1e-11)
    tail = power_tail(r[0], r[1], weight[0], weight[1])
    via_phi = integrate(lambda t: t**2 * fields.phi_prime(t), r[0], 1.0,
                        breakpoints=np.concatenate((r[::8], sol.h.features())), rtol=1e-11) / (N - 1.0)
    gradient_p = body + tail
    certs["w1p_finite"] = bool(np.isfinite(gradient_p) and abs(body - via_phi) <= 1e-8 * max(1.0, abs(body)))
    details["gradient_integral"] = gradient_p

    radii, inc = _decade_increments(fields, r_min=prof.grid.r_min)
    certs["unbounded_growth"] = bool(inc.size >= 2 and inc[-1] >= 0.99 * inc[-2] and inc[-1] > 0.0)
    details["decade_increments"] = inc.tolist()

    key = r * sol.phi_prime - 2.0 * s * sol.phi
    pointwise = bool(np.all(key >= -1e-12 * np.abs(r * sol.phi_prime)))
    reduction = (p - 1.0) / (N - 1.0) * r**2 * sol.phi_prime - 4.0 * sol.phi**2 / sol.phi_prime
    reduction_ok = bool(np.all(reduction >= -1e-12 * (p - 1.0) / (N - 1.0) * r**2 * sol.phi_prime))
    hardy_ok = True
    for k in range(n_random):
        xi = RandomBump(seed * 100003 + k, support=(max(cut_radius, r[0]), 1.0))
        _, _, holds = hardy_check(fields.phi, fields.phi_prime, xi, breakpoints=sol.h.features())
        hardy_ok &= holds
    certs["hardy_semistable"] = bool(pointwise and reduction_ok and hardy_ok)
    details["hardy_pointwise_min"] = float(np.min(key / np.maximum(np.abs(r * sol.phi_prime), 1e-300)))

    rep = min_eigenvalue(prof, sol.gprime_samples, cut_radius=cut_radius, mesh_count=mesh_count,
                         extra_nodes=sol.h.features())
    certs["eigen_semistable"] = rep.semi_stable
    details["min_eigenvalue"] = rep.min_eigenvalue
    details["eigen_verdict"] = rep.verdict.value

    minus_w = -prof.w
    certs["g_nonneg"] = bool(np.all(np.diff(minus_w) >= -1e-12 * np.abs(minus_w[1:])) and np.all(sol.g_samples >= 0.0))
    gscale = np.max(np.abs(sol.gprime_samples))
    certs["g_monotone"] = bool(np.all(sol.gprime_samples >= -1e-10 * gscale))
    return replace(sol, certificates=certs, details=details)


# --- constructions ----------------------------------------------------------


class Mode(enum.Enum):
    VALUES = "values"
    SLOPES = "slopes"
    CONCAVITY = "concavity"


def _validate_sequences(rn, yn):
    rn = np.asarray(rn, dtype=float).ravel()
    yn = np.asarray(yn, dtype=float).ravel()
    if rn.shape != yn.shape:
        raise DomainError("r_n and y_n must have the same length")
    if rn.size > MAX_TERMS:
        raise DomainError(f"at most {MAX_TERMS} terms supported")
    if rn.size and (np.any(rn <= 0.0) or np.any(rn > 1.0)):
        raise DomainError("r_n must lie in (0, 1]")
    if np.any(np.diff(rn) >= 0.0):
        raise DomainError("r_n must be strictly decreasing")
    if np.any(~(yn > 0.0)):
        raise DomainError("y_n must be positive")
    return rn, yn


def _half_widths(rn, wanted=None, shrink_tries=60):
    """Largest disjoint half-widths (capped by ``wanted``) keeping supports in (0, 1 + gap)."""
    if rn.size == 0:
        return rn.copy()
    gaps = np.full(rn.size, np.inf)
    if rn.size > 1:
        d = rn[:-1] - rn[1:]
        gaps[:-1] = np.minimum(gaps[:-1], d)
        gaps[1:] = np.minimum(gaps[1:], d)
    delta = 0.45 * np.minimum(gaps, rn)
    if wanted is not None:
        delta = np.minimum(delta, wanted)
    for _ in range(shrink_tries):
        lo, hi = rn - delta, rn + delta
        if np.all(lo > 0.0) and np.all(hi[1:] < lo[:-1]) and np.all(delta > 0.0):
            return delta
        delta = 0.5 * delta
    raise DomainError("could not separate the supports; r_n are too close")


def construct_h(mode, rn=(), yn=(), eps=None):
    """Generator with prescribed values, slopes or concavity at the radii r_n.

    values    -- bumps of height y_n at r_n with disjoint supports;
    slopes    -- smooth monotone steps, slope y_n at r_n, total rise <= 1;
    concavity -- concave caps with h''(r_n) = -y_n, h(0) = 0, 0 <= h' <= eps.
    """
    mode = Mode(mode)
    rn, yn = _validate_sequences(rn, yn)
    if rn.size == 0:
        return ZeroH()
    Ib = bump_integral()
    if mode is Mode.VALUES:
        return BumpSumH(rn, _half_widths(rn), yn)
    if mode is Mode.SLOPES:
        room = _half_widths(rn)
        rises = np.minimum(1.0 / rn.size, Ib * yn * room)
        delta = _half_widths(rn, wanted=rises / (Ib * yn))
        rises = Ib * yn * delta
        return StepSumH(rn, delta, rises)
    if eps is None or not eps > 0.0:
        raise DomainError("concavity mode needs eps > 0")
    delta = _half_widths(rn, wanted=eps / (rn.size * yn * Ib))
    return CapSumH(rn, delta, yn)


@dataclass(frozen=True, eq=False)
class BlowupResult:
    solution: FamilySolution
    achieved: list
    values: list
    targets: list
    amplification: list
    eps: float = None


def _targets_met(order, fields, rn, Mn):
    u_r, u_rr, u_rrr = fields.derivatives(rn)
    if order == 1:
        vals = np.abs(u_r)
    elif order == 2:
        vals = -u_rr
    else:
        vals = u_rrr
    return vals >= Mn, vals


def _hypotheses_hold(order, fields, r):
    if order == 1:
        return True
    g, gp = fields.g_along(r)
    if np.any(g < 0.0):
        return False
    return order == 2 or bool(np.all(gp >= 0.0))


def demonstrate_blowup(order, rn, Mn, N, p, eps0=0.05, r_min=FAMILY_R_MIN):
    """Family solution with |d^k u/dr^k (r_n)| >= M_n for k = order.

    k = 1 uses h(r_n) = (N-1) M_n^p r_n^(N-2s-3) directly.  For k = 2 the
    slopes h'(r_n) are doubled until -u_rr(r_n) >= M_n; for k = 3 the
    slope bound eps is halved until g' >= 0 holds and the curvatures
    -h''(r_n) are then doubled until u_rrr(r_n) >= M_n.  Each target stops
    amplifying after a factor 2^40 and is then reported as not achieved.
    """
    if order not in (1, 2, 3):
        raise DomainError("order must be 1, 2 or 3")
    if regime(N, p) is Regime.SUBCRITICAL:
        raise RegimeError(f"blow-up constructions need N >= N_c(p) = {critical_dimension(p):.6g}")
    rn, Mn = _validate_sequences(rn, Mn)
    s = hardy_root(N, p)
    check_grid = RadialGrid.geometric(r_min=r_min, n_geometric=1500, n_uniform=400).nodes
    eps = None
    if order == 1:
        yn = (N - 1.0) * Mn**p * rn ** (N - 2.0 * s - 3.0)
        h = construct_h(Mode.VALUES, rn, yn)
        amp = [1.0] * rn.size
    else:
        mode = Mode.SLOPES if order == 2 else Mode.CONCAVITY
        yn = np.ones_like(rn)
        amp = np.ones_like(rn)
        if order == 3:
            eps = eps0
            while True:
                h = construct_h(mode, rn, yn, eps)
                grid_pts = np.unique(np.concatenate((check_grid, h.features())))
                if _hypotheses_hold(3, FamilyFields(h, N, p), grid_pts):
                    break
                eps *= 0.5
                if eps < 1e-12:
                    raise DomainError("could not certify g' >= 0 for any slope bound")
        h = construct_h(mode, rn, yn, eps)
        while True:
            fields = FamilyFields(h, N, p)
            met, _ = _targets_met(order, fields, rn, Mn)
            grow = ~met & (amp < AMPLIFY_CAP)
            if not np.any(grow):
                break
            yn = np.where(grow, 2.0 * yn, yn)
            amp = np.where(grow, 2.0 * amp, amp)
            trial = construct_h(mode, rn, yn, eps)
            grid_pts = np.unique(np.concatenate((check_grid, trial.features())))
            if not _hypotheses_hold(order, FamilyFields(trial, N, p), grid_pts):
                if order == 3 and eps > 1e-12:
                    eps *= 0.5
                    h = construct_h(mode, rn, yn, eps)
                    continue
                amp = np.where(grow, AMPLIFY_CAP, amp)
                yn = np.where(grow, yn / 2.0, yn)
                break
            h = trial
        amp = amp.tolist()
    sol = verify_family(recover_g(family_profile(h, N, p, r_min=r_min)))
    met, vals = _targets_met(order, sol.fields, rn, Mn)
    return BlowupResult(solution=sol, achieved=[bool(x) for x in met], values=vals.tolist(),
                        targets=Mn.tolist(), amplification=list(amp), eps=eps)
