"""Exponent arithmetic, nonlinearities, closed-form extremal solutions and
energy evaluation for the radial problem -Delta_p u = lambda f(u) in B_1.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln

from .errors import DomainError
from .profile import RadialGrid, RadialProfile
from .quadrature import integrate

N_RANGE = (2, 50)
P_RANGE = (1.05, 10.0)
CRITICAL_TOL = 1e-12


# --- nonlinearities ---------------------------------------------------------


class Nonlinearity:
    """A scalar C^2 function s -> f(s) with derivatives and a primitive."""

    #: smallest argument at which the function is defined (exclusive)
    domain_min = -math.inf

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self, s, order=1):
        raise NotImplementedError

    def antiderivative(self, s):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Nonlinearity):
    def __call__(self, s):
        return np.exp(s)

    def derivative(self, s, order=1):
        return np.exp(s)

    def antiderivative(self, s):
        return np.exp(s)

    def describe(self):
        return {"kind": "exp"}


@dataclass(frozen=True)
class PowerShift(Nonlinearity):
    """f(t) = (1 + t)^m."""

    m: float
    domain_min = -1.0

    def __post_init__(self):
        if not self.m > 0.0:
            raise DomainError(f"PowerShift needs m > 0, got {self.m}")

    def __call__(self, s):
        return np.power(1.0 + np.asarray(s, dtype=float), self.m)

    def derivative(self, s, order=1):
        base = 1.0 + np.asarray(s, dtype=float)
        coef = 1.0
        for j in range(order):
            coef *= self.m - j
        return coef * np.power(base, self.m - order)

    def antiderivative(self, s):
        return np.power(1.0 + np.asarray(s, dtype=float), self.m + 1.0) / (self.m + 1.0)

    def describe(self):
        return {"kind": "power", "m": self.m}


class Sampled(Nonlinearity):
    """Monotone piecewise-cubic (PCHIP) interpolant of a table (s_i, g_i)."""

    def __init__(self, s, values):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.shape != values.shape or s.size < 2:
            raise DomainError("sampled table needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(s) <= 0.0):
            raise DomainError("sampled abscissae must be strictly increasing")
        self.s = s
        self.values = values
        self._f = PchipInterpolator(s, values, extrapolate=True)
        self._d1 = self._f.derivative(1)
        self._d2 = self._f.derivative(2)
        self._prim = self._f.antiderivative()

    def __call__(self, s):
        return self._f(s)

    def derivative(self, s, order=1):
        if order == 1:
            return self._d1(s)
        if order == 2:
            return self._d2(s)
        return self._f.derivative(order)(s)

    def antiderivative(self, s):
        return self._prim(s)

    def describe(self):
        return {"kind": "sampled", "n": int(self.s.size), "range": [float(self.s[0]), float(self.s[-1])]}


@dataclass(frozen=True)
class Scaled(Nonlinearity):
    """factor * base(s); used for g = lambda f."""

    base: Nonlinearity
    factor: float

    @property
    def domain_min(self):
        return self.base.domain_min

    def __call__(self, s):
        return self.factor * self.base(s)

    def derivative(self, s, order=1):
        return self.factor * self.base.derivative(s, order)

    def antiderivative(self, s):
        return self.factor * self.base.antiderivative(s)

    def describe(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.describe()}


class Zero(Nonlinearity):
    def __call__(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def derivative(self, s, order=1):
        return np.zeros_like(np.asarray(s, dtype=float))

    def antiderivative(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def describe(self):
        return {"kind": "zero"}


# --- problem data -----------------------------------------------------------


def check_dimension(N, p):
    if isinstance(N, bool) or int(N) != N:
        raise DomainError(f"N must be an integer, got {N!r}")
    if not N_RANGE[0] <= N <= N_RANGE[1]:
        raise DomainError(f"N={N} outside supported range {N_RANGE}")
    if not P_RANGE[0] < p < P_RANGE[1]:
        raise DomainError(f"p={p} outside supported range {P_RANGE}")


@dataclass(frozen=True)
class ProblemSpec:
    """The instance -Delta_p u = lam * f(u) in the unit ball of R^N."""

    N: int
    p: float
    lam: float
    f: Nonlinearity

    def __post_init__(self):
        check_dimension(self.N, self.p)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")
        if isinstance(self.f, PowerShift) and not self.f.m > self.p - 1.0:
            raise DomainError(f"PowerShift needs m > p - 1 = {self.p - 1.0}, got {self.f.m}")

    @property
    def g(self):
        return Scaled(self.f, self.lam)

    def with_lambda(self, lam):
        return ProblemSpec(self.N, self.p, lam, self.f)

    def require_minimal_branch(self):
        """Minimal-branch solving needs f increasing with f(0) > 0."""
        f0 = float(self.f(0.0))
        if not f0 > 0.0:
            raise DomainError(f"f(0) must be positive, got {f0}")
        if isinstance(self.f, Sampled):
            if np.any(np.diff(self.f.values) <= 0.0):
                raise DomainError("sampled f must be strictly increasing")
        elif isinstance(self.f, (Exponential, PowerShift)):
            pass
        else:
            s = np.linspace(0.0, 50.0, 501)
            if np.any(np.asarray(self.f.derivative(s)) < 0.0):
                raise DomainError("f must be increasing")


# --- exponents --------------------------------------------------------------


class Regime(enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


def critical_dimension(p):
    """N_c = p + 4p/(p-1), the dimension where the extremal solution stops being bounded."""
    if not p > 1.0:
        raise DomainError(f"critical dimension needs p > 1, got {p}")
    return p + 4.0 * p / (p - 1.0)


def hardy_root(N, p):
    """sqrt((N-1)/(p-1)), the recurring square root in every exponent."""
    return math.sqrt((N - 1.0) / (p - 1.0))


@dataclass(frozen=True)
class ExponentSet:
    N: int
    p: float
    N_c: float
    alpha: float

    def deriv_exponent(self, k):
        """Decay exponent of the k-th radial derivative (k = 1, 2, 3)."""
        if k not in (1, 2, 3):
            raise DomainError(f"derivative order must be 1, 2 or 3, got {k}")
        return self.alpha + k

    @property
    def root(self):
        return hardy_root(self.N, self.p)


def exponent_set(N, p):
    if N < 2 or not p > 1.0:
        raise DomainError("need N >= 2 and p > 1")
    alpha = (N - 2.0 * hardy_root(N, p) - p - 2.0) / p
    return ExponentSet(N=N, p=p, N_c=critical_dimension(p), alpha=alpha)


def regime(N, p):
    n_c = critical_dimension(p)
    if abs(N - n_c) <= CRITICAL_TOL * n_c:
        return Regime.CRITICAL
    return Regime.SUBCRITICAL if N < n_c else Regime.SUPERCRITICAL


def omega(N):
    """Surface area of the unit sphere in R^N."""
    return math.exp(math.log(2.0) + 0.5 * N * math.log(math.pi) - gammaln(0.5 * N))


# --- closed forms -----------------------------------------------------------


class ExtremalKind(enum.Enum):
    EXPONENTIAL_CRITICAL = "exp-critical"
    POWER_SUPERCRITICAL = "power-supercritical"


@dataclass(frozen=True)
class ClosedForm:
    profile: RadialProfile
    lambda_star: float
    m: float = None


def power_exponent_m(N, p):
    """Exponent m of f = (1+u)^m whose extremal solution is r^(-alpha) - 1."""
    s = hardy_root(N, p)
    num = (p - 1.0) * N - 2.0 * math.sqrt((p - 1.0) * (N - 1.0)) - p + 2.0
    den = N - 2.0 * s - p - 2.0
    if den <= 0.0:
        raise DomainError(f"power closed form needs N > N_c(p) = {critical_dimension(p)}")
    return num / den


def exact_extremal(kind, N, p, grid=None):
    """Closed-form extremal solution of the exponential-critical or
    power-supercritical problem, sampled on ``grid``."""
    kind = ExtremalKind(kind)
    check_dimension(N, p)
    if grid is None:
        grid = RadialGrid.geometric(r_min=1e-8)
    r = grid.nodes
    n_c = critical_dimension(p)
    if kind is ExtremalKind.EXPONENTIAL_CRITICAL:
        if abs(N - n_c) >= CRITICAL_TOL:
            raise DomainError(f"exponential closed form needs N = N_c(p) = {n_c}, got N={N}")
        lam = 4.0 * p**p / (p - 1.0)
        u = -p * np.log(r)
        u_r = -p / r
        u_rr = p / r**2
        u_rrr = -2.0 * p / r**3
        spec = ProblemSpec(N, p, lam, Exponential())
        m = None
    else:
        if not N > n_c:
            raise DomainError(f"power closed form needs N > N_c(p) = {n_c}, got N={N}")
        a = exponent_set(N, p).alpha
        m = power_exponent_m(N, p)
        lam = (p / (m - (p - 1.0))) ** (p - 1.0) * (N - m * p / (m - (p - 1.0)))
        u = r**-a - 1.0
        u[-1] = 0.0
        u_r = -a * r ** (-a - 1.0)
        u_rr = a * (a + 1.0) * r ** (-a - 2.0)
        u_rrr = -a * (a + 1.0) * (a + 2.0) * r ** (-a - 3.0)
        spec = ProblemSpec(N, p, lam, PowerShift(m))
    profile = RadialProfile.from_derivative(
        grid, u, u_r, N, p, u_rr=u_rr, u_rrr=u_rrr, spec=spec,
        meta={"source": kind.value, "exact": True},
    )
    return ClosedForm(profile=profile, lambda_star=lam, m=m)


# --- integrals over annuli --------------------------------------------------


def _check_annulus(profile, lo, hi):
    if not lo > 0.0 or hi > 1.0 or not lo < hi:
        raise DomainError(f"invalid annulus ({lo}, {hi})")
    if lo < profile.grid.r_min * (1 - 1e-14):
        raise DomainError(f"profile grid starts at {profile.grid.r_min}, annulus at {lo}")


def radial_integral(profile, integrand, lo, hi):
    """omega_N * integral_lo^hi integrand(r) r^(N-1) dr, split at grid nodes."""
    _check_annulus(profile, lo, hi)
    N = profile.N
    val = integrate(lambda r: integrand(r) * r ** (N - 1), lo, hi, breakpoints=profile.r)
    return omega(N) * val


def energy(profile, g, annulus=(0.5, 1.0)):
    """E(u) = omega_N int [ |u_r|^p / p - G(u) ] r^(N-1) dr over the annulus,
    with G' = g normalised so that G(u(r_hi)) = 0."""
    lo, hi = annulus
    _check_annulus(profile, lo, hi)
    it = profile.interpolant
    p = profile.p
    G_hi = float(g.antiderivative(it.u(hi)))

    def integrand(r):
        return np.abs(it.u_r(r)) ** p / p - (g.antiderivative(it.u(r)) - G_hi)

    return radial_integral(profile, integrand, lo, hi)


def grad_norm(profile, lo=0.5, hi=1.0):
    """||grad u||_{L^p} on the annulus lo < |x| < hi."""
    it = profile.interpolant
    p = profile.p
    val = radial_integral(profile, lambda r: np.abs(it.u_r(r)) ** p, lo, hi)
    return val ** (1.0 / p)


def w1p_norm(profile, lo=0.5, hi=1.0):
    """||u||_{W^{1,p}} on the annulus lo < |x| < hi."""
    it = profile.interpolant
    p = profile.p
    val = radial_integral(profile, lambda r: np.abs(it.u(r)) ** p + np.abs(it.u_r(r)) ** p, lo, hi)
    return val ** (1.0 / p)
