"""Semi-stability of radial profiles.

Three routes are provided:

* the quadratic form Q(xi) = omega_N int [(p-1)|u_r|^(p-2) xi'^2 - g'(u) xi^2] r^(N-1) dr
  and the smallest eigenvalue of its linear finite-element discretisation,
* the weighted inequality (N-1) int |u_r|^p eta^2 <= (p-1) int |u_r|^p ((r eta)')^2,
  a consequence of semi-stability, evaluated on explicit test functions,
* the generalized Hardy inequality int 4 Phi^2/Phi' xi'^2 >= int Phi' xi^2.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .bumps import bump, bump_d1
from .core import hardy_root, omega
from .errors import DegenerateError, DomainError
from .quadrature import gauss_legendre, integrate, power_tail

DEFAULT_CUT = 1e-4
DEFAULT_MESH = 400
TOL_FACTOR = 1e-6
INEQ_TOL = 1e-8


# --- test functions ---------------------------------------------------------


class TestFunction:
    """A radial test function xi(r) with its derivative.

    ``support`` is a closed interval outside of which xi vanishes and
    ``breakpoints`` lists radii where xi' may jump.
    """

    __test__ = False  # keep pytest from collecting this class
    kind = "abstract"
    support = (0.0, 1.0)
    breakpoints = ()

    def __call__(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError

    def scaled(self, factor):
        return ScaledTest(self, factor)

    def describe(self):
        return {"kind": self.kind}


class ZeroTest(TestFunction):
    kind = "zero"
    support = (0.5, 0.5)

    def __call__(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


class ScaledTest(TestFunction):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.kind = base.kind
        self.support = base.support
        self.breakpoints = base.breakpoints

    def __call__(self, r):
        return self.factor * self.base(r)

    def derivative(self, r):
        return self.factor * self.base.derivative(r)


class Lemma21Piecewise(TestFunction):
    """Three-piece eta: flat cap r0^(-s-1) on [0, r0], t^(-s-1) on (r0, 1/2],
    linear 2^(s+2)(1 - t) on (1/2, 1], with s = sqrt((N-1)/(p-1)).

    The piece on (r0, 1/2] makes (N-1) eta^2 = (p-1)((t eta)')^2 exactly.
    """

    kind = "lemma21-piecewise"

    def __init__(self, r_split, N, p):
        if not 0.0 < r_split < 0.5:
            raise DomainError(f"split radius must lie in (0, 1/2), got {r_split}")
        self.r_split = float(r_split)
        self.s = hardy_root(N, p)
        self.support = (0.0, 1.0)
        self.breakpoints = (self.r_split, 0.5)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s, r0 = self.s, self.r_split
        return np.where(
            r <= r0, r0 ** (-s - 1.0),
            np.where(r <= 0.5, np.maximum(r, r0) ** (-s - 1.0), 2.0 ** (s + 2.0) * (1.0 - r)),
        ) * (r <= 1.0)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        s, r0 = self.s, self.r_split
        mid = (-s - 1.0) * np.maximum(r, r0) ** (-s - 2.0)
        return np.where(r <= r0, 0.0, np.where(r <= 0.5, mid, -(2.0 ** (s + 2.0)))) * (r <= 1.0)

    def describe(self):
        return {"kind": self.kind, "r_split": self.r_split}


class BumpTest(TestFunction):
    """amplitude * b((r - center)/halfwidth)."""

    kind = "bump"

    def __init__(self, center, halfwidth, amplitude=1.0):
        if not halfwidth > 0.0:
            raise DomainError("bump half-width must be positive")
        self.center = float(center)
        self.halfwidth = float(halfwidth)
        self.amplitude = float(amplitude)
        self.support = (self.center - self.halfwidth, self.center + self.halfwidth)

    def __call__(self, r):
        return self.amplitude * bump((np.asarray(r, dtype=float) - self.center) / self.halfwidth)

    def derivative(self, r):
        x = (np.asarray(r, dtype=float) - self.center) / self.halfwidth
        return self.amplitude * bump_d1(x) / self.halfwidth

    def describe(self):
        return {"kind": self.kind, "center": self.center, "halfwidth": self.halfwidth,
                "amplitude": self.amplitude}


class RandomBump(BumpTest):
    """Bump with seeded random centre and width, placed log-uniformly in ``support``."""

    kind = "random-bump"

    def __init__(self, seed, support=(1e-3, 1.0)):
        lo, hi = support
        if not 0.0 < lo < hi <= 1.0:
            raise DomainError(f"invalid support {support}")
        rng = np.random.default_rng(seed)
        a, b = sorted(np.exp(rng.uniform(math.log(lo), math.log(hi), size=2)))
        if b - a < 1e-3 * b:
            b = min(hi, a * 1.5)
            a = b / 1.5
        super().__init__(0.5 * (a + b), 0.5 * (b - a), amplitude=rng.uniform(0.5, 2.0))
        self.seed = seed

    def describe(self):
        d = super().describe()
        d["seed"] = self.seed
        return d


class Lemma23Rescaled(TestFunction):
    """xi(s) = zeta(s / radius) for a profile zeta compactly supported in (0, 1).

    The default zeta is the bump centred at 1/2 with half-width 1/2.
    """

    kind = "lemma23-rescaled"

    def __init__(self, radius, zeta=None, dzeta=None, zeta_support=(0.0, 1.0)):
        if not 0.0 < radius <= 1.0:
            raise DomainError("radius must lie in (0, 1]")
        self.radius = float(radius)
        if zeta is None:
            zeta, dzeta = (lambda x: bump(2.0 * x - 1.0)), (lambda x: 2.0 * bump_d1(2.0 * x - 1.0))
        elif dzeta is None:
            raise DomainError("a custom zeta needs its derivative")
        self._zeta, self._dzeta = zeta, dzeta
        self.support = (zeta_support[0] * radius, zeta_support[1] * radius)

    def __call__(self, r):
        x = np.asarray(r, dtype=float) / self.radius
        return np.where((x > 0.0) & (x < 1.0), self._zeta(np.clip(x, 0.0, 1.0)), 0.0)

    def derivative(self, r):
        x = np.asarray(r, dtype=float) / self.radius
        return np.where((x > 0.0) & (x < 1.0), self._dzeta(np.clip(x, 0.0, 1.0)), 0.0) / self.radius

    def describe(self):
        return {"kind": self.kind, "radius": self.radius}


class UserSampled(TestFunction):
    """Monotone-cubic interpolation of user samples, zero outside the samples."""

    kind = "user-sampled"

    def __init__(self, r, values):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.size < 3 or np.any(np.diff(r) <= 0.0):
            raise DomainError("sample radii must be strictly increasing (at least 3)")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise DomainError("sampled test function must vanish at both ends")
        self._f = PchipInterpolator(r, values, extrapolate=False)
        self._df = self._f.derivative()
        self.support = (float(r[0]), float(r[-1]))
        self.breakpoints = tuple(r.tolist())

    def __call__(self, r):
        return np.nan_to_num(self._f(np.asarray(r, dtype=float)))

    def derivative(self, r):
        return np.nan_to_num(self._df(np.asarray(r, dtype=float)))


# --- helpers ----------------------------------------------------------------


def potential_along(profile, gprime):
    """r -> g'(u(r)) for ``gprime`` given as a callable of s, a Nonlinearity
    (its derivative is used) or an array of samples at the profile nodes."""
    it = profile.interpolant
    if isinstance(gprime, np.ndarray) or isinstance(gprime, (list, tuple)):
        samples = np.asarray(gprime, dtype=float)
        if samples.shape != profile.r.shape:
            raise DomainError("sampled g' must have one value per profile node")
        spline = PchipInterpolator(np.log(profile.r), samples, extrapolate=False)
        return lambda r: spline(np.log(np.asarray(r, dtype=float)))
    if hasattr(gprime, "derivative") and hasattr(gprime, "antiderivative"):
        fn = gprime.derivative
    else:
        fn = gprime
    return lambda r: np.asarray(fn(it.u(r)), dtype=float)


def _require_descending(profile, lo, hi, hint):
    r, u_r = profile.r, profile.u_r
    inside = np.nonzero((r >= lo) & (r <= hi))[0]
    bad = inside[~(u_r[inside] < 0.0)]
    if bad.size:
        i = int(bad[0])
        raise DegenerateError(f"u_r = {u_r[i]:g} at node {i} (r = {r[i]:.6g}); {hint}",
                              node=i, radius=float(r[i]))


def _support_in_grid(profile, xi):
    lo, hi = xi.support
    return max(lo, profile.grid.r_min), min(hi, 1.0)


# --- quadratic form ---------------------------------------------------------


def quadratic_form(profile, gprime, xi):
    """Q(xi) = omega_N int [(p-1)|u_r|^(p-2) xi'^2 - g'(u) xi^2] r^(N-1) dr."""
    lo, hi = _support_in_grid(profile, xi)
    if hi <= lo:
        return 0.0
    _require_descending(profile, lo, hi, "the weight |u_r|^(p-2) degenerates")
    N, p = profile.N, profile.p
    it = profile.interpolant
    pot = potential_along(profile, gprime)

    def integrand(r):
        ur = np.abs(it.u_r(r))
        return ((p - 1.0) * ur ** (p - 2.0) * xi.derivative(r) ** 2 - pot(r) * xi(r) ** 2) * r ** (N - 1)

    bp = np.concatenate((profile.r, np.asarray(xi.breakpoints, dtype=float)))
    return omega(N) * integrate(integrand, lo, hi, breakpoints=bp, rtol=1e-11)


# --- discrete pencil --------------------------------------------------------


class MassKind(enum.Enum):
    HARDY = "hardy"
    VOLUME = "volume"


@dataclass(frozen=True, eq=False)
class StabilityPencil:
    """Tridiagonal pencil (K + V) x = mu M x on the interior mesh nodes."""

    nodes: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    mass_diag: np.ndarray
    mass_off: np.ndarray

    @property
    def size(self):
        return self.diag.size

    def count_below(self, sigma):
        """Number of eigenvalues below sigma (inertia of the LDL^T pivots)."""
        a = self.diag - sigma * self.mass_diag
        b = self.off - sigma * self.mass_off
        count = 0
        d = a[0]
        tiny = np.finfo(float).tiny
        for i in range(a.size):
            if i:
                d = a[i] - b[i - 1] * b[i - 1] / d
            if d == 0.0:
                d = -tiny
            if d < 0.0:
                count += 1
        return count

    def dense(self):
        A = np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)
        B = np.diag(self.mass_diag) + np.diag(self.mass_off, 1) + np.diag(self.mass_off, -1)
        return A, B

    def rayleigh(self, x):
        x = np.asarray(x, dtype=float)
        ax = self.diag * x
        ax[:-1] += self.off * x[1:]
        ax[1:] += self.off * x[:-1]
        bx = self.mass_diag * x
        bx[:-1] += self.mass_off * x[1:]
        bx[1:] += self.mass_off * x[:-1]
        return float(x @ ax), float(x @ bx)

    def smallest(self, abs_tol):
        """Smallest eigenvalue by Sturm-count bisection to ``abs_tol``."""
        hi = float(np.min(self.diag / self.mass_diag))
        step = max(1.0, abs(hi))
        lo = hi - step
        while self.count_below(lo) > 0:
            step *= 2.0
            lo = hi - step
            if step > 1e300:
                raise DegenerateError("pencil spectrum unbounded below")
        for _ in range(400):
            if hi - lo <= abs_tol:
                break
            mid = 0.5 * (lo + hi)
            if self.count_below(mid) > 0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)


def assemble_pencil(profile, gprime, cut_radius=DEFAULT_CUT, mesh_count=DEFAULT_MESH,
                    mass="hardy", weight_scale=1.0, extra_nodes=()):
    """Linear elements on a log-uniform mesh of (cut_radius, 1) with Dirichlet ends.

    Stiffness weight (p-1)|u_r|^(p-2) r^(N-1), potential -g'(u) r^(N-1).
    The mass weight is (p-1)|u_r|^(p-2) r^(N-3) for ``mass="hardy"`` (the
    weight of the Hardy term, which makes the critical marginal case
    converge to 0) or r^(N-1) for ``mass="volume"``.  ``weight_scale``
    multiplies stiffness and potential together.  ``extra_nodes`` inside
    (cut_radius, 1) are merged into the mesh to resolve localized features.
    """
    if not cut_radius > 0.0:
        raise DomainError("cut_radius must be positive")
    if mesh_count < 100:
        raise DomainError("mesh_count must be at least 100")
    if cut_radius < profile.grid.r_min * (1 - 1e-12) or cut_radius >= 1.0:
        raise DomainError(f"cut_radius {cut_radius} outside the profile grid [{profile.grid.r_min}, 1)")
    mass = MassKind(mass)
    _require_descending(profile, cut_radius, 1.0, "try a larger cut_radius")
    N, p = profile.N, profile.p
    it = profile.interpolant
    pot = potential_along(profile, gprime)
    x = np.exp(np.linspace(math.log(cut_radius), 0.0, mesh_count + 1))
    x[-1] = 1.0
    extra = np.asarray(extra_nodes, dtype=float).ravel()
    extra = extra[(extra > cut_radius * (1 + 1e-9)) & (extra < 1.0 - 1e-9)]
    if extra.size:
        x = np.unique(np.concatenate((x, extra)))
        x = x[np.concatenate(([True], np.diff(x) > 1e-12 * x[1:]))]
    a, b = x[:-1], x[1:]
    h = b - a
    gx, gw = gauss_legendre(4)
    rq = 0.5 * (a + b)[:, None] + 0.5 * h[:, None] * gx[None, :]
    wq = 0.5 * h[:, None] * gw[None, :]
    ur = np.abs(it.u_r(rq))
    stiff_w = weight_scale * (p - 1.0) * ur ** (p - 2.0) * rq ** (N - 1)
    pot_w = -weight_scale * pot(rq) * rq ** (N - 1)
    if mass is MassKind.HARDY:
        mass_w = (p - 1.0) * ur ** (p - 2.0) * rq ** (N - 3)
    else:
        mass_w = rq ** (N - 1)
    if not (np.all(np.isfinite(stiff_w)) and np.all(np.isfinite(pot_w)) and np.all(np.isfinite(mass_w))):
        raise DegenerateError("non-finite pencil weights; try a larger cut_radius")
    left = (b[:, None] - rq) / h[:, None]
    right = (rq - a[:, None]) / h[:, None]
    k = np.sum(wq * stiff_w, axis=1) / h**2
    v00, v01, v11 = (np.sum(wq * pot_w * s, axis=1) for s in (left * left, left * right, right * right))
    m00, m01, m11 = (np.sum(wq * mass_w * s, axis=1) for s in (left * left, left * right, right * right))
    n = x.size
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    mdiag = np.zeros(n)
    moff = np.zeros(n - 1)
    diag[:-1] += k + v00
    diag[1:] += k + v11
    off += -k + v01
    mdiag[:-1] += m00
    mdiag[1:] += m11
    moff += m01
    return StabilityPencil(nodes=x[1:-1], diag=diag[1:-1], off=off[1:-1],
                           mass_diag=mdiag[1:-1], mass_off=moff[1:-1])


class Verdict(enum.Enum):
    SEMI_STABLE = "SemiStable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


@dataclass(frozen=True)
class StabilityReport:
    min_eigenvalue: float
    cut_radius: float
    mesh_count: int
    verdict: Verdict
    route: str
    stability_tol: float
    mass: str = "hardy"
    certified: str = ""
    details: dict = field(default_factory=dict)

    @property
    def semi_stable(self):
        return self.verdict is not Verdict.UNSTABLE


def classify(mu, tol):
    if abs(mu) < tol:
        return Verdict.MARGINAL
    return Verdict.SEMI_STABLE if mu >= -tol else Verdict.UNSTABLE


def _certified(verdict):
    if verdict is Verdict.UNSTABLE:
        return "instability (a discrete test function with Q < 0 exists)"
    return "discrete semi-stability only (continuum semi-stability is not certified)"


def min_eigenvalue(profile, gprime, cut_radius=DEFAULT_CUT, mesh_count=DEFAULT_MESH,
                   mass="hardy", stability_tol=None, weight_scale=1.0, extra_nodes=()):
    """Smallest eigenvalue of the discretised stability pencil."""
    pencil = assemble_pencil(profile, gprime, cut_radius, mesh_count, mass, weight_scale, extra_nodes)
    scale = float(np.max(np.abs(pencil.diag)))
    tol = TOL_FACTOR * scale if stability_tol is None else float(stability_tol)
    mu = pencil.smallest(abs_tol=min(tol, 1e-9 * max(1.0, scale)) * 1e-3)
    verdict = classify(mu, tol)
    return StabilityReport(
        min_eigenvalue=mu, cut_radius=cut_radius, mesh_count=mesh_count, verdict=verdict,
        route="eigen", stability_tol=tol, mass=MassKind(mass).value, certified=_certified(verdict),
        details={"pencil_scale": scale},
    )


@dataclass(frozen=True)
class MarginalityStudy:
    cuts: tuple
    raw: tuple
    refined: tuple
    richardson: tuple
    extrapolated: float
    report: StabilityReport


def marginality_study(profile, gprime, cuts=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), mesh_count=DEFAULT_MESH,
                      mass="hardy"):
    """Mesh-ladder and cut-ladder extrapolation of the smallest eigenvalue.

    For each cut the linear-element eigenvalue is Richardson-extrapolated
    from mesh_count and 2*mesh_count elements (second-order convergence);
    the results are then fitted to mu(eps) = mu_inf + c / log(eps)^2 and
    mu_inf is reported.
    """
    raw, fine, rich = [], [], []
    for eps in cuts:
        m1 = min_eigenvalue(profile, gprime, eps, mesh_count, mass).min_eigenvalue
        m2 = min_eigenvalue(profile, gprime, eps, 2 * mesh_count, mass).min_eigenvalue
        raw.append(m1)
        fine.append(m2)
        rich.append((4.0 * m2 - m1) / 3.0)
    if len(cuts) >= 2:
        X = np.column_stack((np.ones(len(cuts)), 1.0 / np.log(np.asarray(cuts)) ** 2))
        mu_inf = float(np.linalg.lstsq(X, np.asarray(rich), rcond=None)[0][0])
    else:
        mu_inf = rich[0]
    last = min_eigenvalue(profile, gprime, cuts[-1], 2 * mesh_count, mass)
    tol = max(last.stability_tol, 0.05)
    verdict = classify(mu_inf, tol)
    report = StabilityReport(
        min_eigenvalue=mu_inf, cut_radius=0.0, mesh_count=2 * mesh_count, verdict=verdict,
        route="eigen-extrapolated", stability_tol=tol, mass=MassKind(mass).value,
        certified=_certified(verdict) + "; extrapolated value, not a discrete certificate",
        details={"cuts": list(cuts), "richardson": rich},
    )
    return MarginalityStudy(tuple(cuts), tuple(raw), tuple(fine), tuple(rich), mu_inf, report)


# --- inequality routes ------------------------------------------------------


def _integral_from_origin(profile, integrand, hi, breakpoints):
    """int_0^hi integrand(r) dr with a fitted power-law tail below r_min."""
    r = profile.r
    r0, r1 = float(r[0]), float(r[1])
    body = integrate(integrand, r0, hi, breakpoints=np.concatenate((r, breakpoints)), rtol=1e-11)
    F0, F1 = float(integrand(np.array([r0]))[0]), float(integrand(np.array([r1]))[0])
    return body + power_tail(r0, r1, F0, F1)


def check_weighted_poincare(profile, eta, tol=INEQ_TOL):
    """(lhs, rhs, holds) for (N-1) int |u_r|^p eta^2 <= (p-1) int |u_r|^p ((r eta)')^2."""
    if isinstance(eta, ZeroTest):
        return 0.0, 0.0, True
    N, p = profile.N, profile.p
    it = profile.interpolant
    lo, hi = eta.support
    hi = min(hi, 1.0)
    bp = np.asarray(eta.breakpoints, dtype=float)

    def weight(r):
        return np.abs(it.u_r(r)) ** p * r ** (N - 1)

    def left(r):
        return weight(r) * eta(r) ** 2

    def right(r):
        return weight(r) * (eta(r) + r * eta.derivative(r)) ** 2

    w = omega(N)
    if lo <= profile.grid.r_min:
        lhs = (N - 1.0) * w * _integral_from_origin(profile, left, hi, bp)
        rhs = (p - 1.0) * w * _integral_from_origin(profile, right, hi, bp)
    else:
        edges = np.concatenate((profile.r, bp))
        lhs = (N - 1.0) * w * integrate(left, lo, hi, breakpoints=edges, rtol=1e-11)
        rhs = (p - 1.0) * w * integrate(right, lo, hi, breakpoints=edges, rtol=1e-11)
    return lhs, rhs, bool(lhs <= rhs + tol * (1.0 + abs(rhs)))


def hardy_check(phi, dphi, xi, length=1.0, breakpoints=(), tol=INEQ_TOL):
    """(lhs, rhs, holds) for int_0^L 4 Phi^2/Phi' xi'^2 >= int_0^L Phi' xi^2."""
    if isinstance(xi, ZeroTest):
        return 0.0, 0.0, True
    lo, hi = max(xi.support[0], 0.0), min(xi.support[1], length)
    if hi <= lo:
        return 0.0, 0.0, True
    probe = np.linspace(lo, hi, 257)[1:-1]
    if np.any(~(np.asarray(dphi(probe)) > 0.0)):
        raise DomainError("Phi' must be positive on the support of xi")
    bp = np.concatenate((np.asarray(breakpoints, dtype=float), np.asarray(xi.breakpoints, dtype=float)))

    def left(r):
        return 4.0 * np.asarray(phi(r)) ** 2 / np.asarray(dphi(r)) * xi.derivative(r) ** 2

    def right(r):
        return np.asarray(dphi(r)) * xi(r) ** 2

    lhs = integrate(left, lo, hi, breakpoints=bp, rtol=1e-11)
    rhs = integrate(right, lo, hi, breakpoints=bp, rtol=1e-11)
    return lhs, rhs, bool(lhs >= rhs - tol * (1.0 + abs(lhs)))
