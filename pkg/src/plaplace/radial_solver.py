"""Shooting solver for radial solutions of -Delta_p u = lambda f(u) in B_1.

The ODE is integrated in t = log r for the pair (u, psi) with
psi = |u_r|^(p-1) / r = -w / r^N, which satisfies

    du/dt   = -r^(p/(p-1)) psi^(1/(p-1))
    dpsi/dt = lambda f(u) - N psi.

Both right-hand sides stay bounded as r -> 0, psi(0) = lambda f(a)/N,
and the flux w = -r^N psi is recovered without cancellation.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .core import ProblemSpec
from .errors import DegenerateError, DomainError, IntegrationBlowUp, NoMatch
from .profile import RadialGrid, RadialProfile

R_START = 1e-6
SERIES_DROP = 1e-3
RTOL = 1e-10
ATOL = 1e-12
# step cap in log r when sampling onto a grid; keeps the dense-output defect
# well below the integrator tolerance
REPORT_MAX_STEP = 0.05
LAMBDA_MIN_SEARCH = 1e-6
LAMBDA_MAX_SEARCH = 1e6
U_FLOOR = -0.5


def default_grid():
    return RadialGrid.geometric(r_min=R_START)


def _series(N, p, lam, f, a, r):
    """Two-term expansion of (u, psi) at the origin for u(0) = a."""
    q = p / (p - 1.0)
    k = 1.0 / (p - 1.0)
    psi0 = lam * float(f(a)) / N
    if psi0 == 0.0:
        return np.full_like(r, a), np.zeros_like(r)
    psi1 = -lam * float(f.derivative(a)) * psi0**k / (q * (q + N))
    rq = r**q
    u = a - psi0**k * (rq / q + psi1 / ((p - 1.0) * psi0) * rq * rq / (2.0 * q))
    psi = psi0 + psi1 * rq
    return u, psi


def start_radius(N, p, lam, f, a):
    """Largest r <= R_START where the series drop a - u(r) is below SERIES_DROP."""
    q = p / (p - 1.0)
    psi0 = lam * float(f(a)) / N
    if psi0 <= 0.0:
        return R_START
    c = psi0 ** (1.0 / (p - 1.0)) / q
    return min(R_START, (SERIES_DROP / c) ** (1.0 / q))


def _rhs(N, p, lam, f):
    q = p / (p - 1.0)
    k = 1.0 / (p - 1.0)

    def rhs(t, y):
        u, psi = y
        return [-math.exp(q * t) * max(psi, 0.0) ** k, lam * float(f(u)) - N * psi]

    return rhs


def _domain_event(f):
    lo = f.domain_min

    def event(t, y):
        return y[0] - (lo + 1e-9) if math.isfinite(lo) else 1.0

    event.terminal = True
    event.direction = -1
    return event


def _integrate(N, p, lam, f, a, t_eval=None, floor=None, rtol=RTOL, atol=ATOL, start=None):
    if start is None:
        r0 = start_radius(N, p, lam, f, a)
        u0, psi0 = _series(N, p, lam, f, a, np.array([r0]))
    else:
        r0, u0, psi0 = start[0], [start[1]], [start[2]]
    events = [_domain_event(f)]
    if floor is not None:

        def below(t, y):
            return y[0] - floor

        below.terminal = True
        below.direction = -1
        events.append(below)
    max_step = np.inf
    if t_eval is not None:
        t_eval = t_eval[t_eval >= math.log(r0)]
        max_step = REPORT_MAX_STEP
    sol = solve_ivp(
        _rhs(N, p, lam, f), (math.log(r0), 0.0), [u0[0], psi0[0]],
        method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval, events=events, max_step=max_step,
    )
    return r0, sol


def integrate_ivp(spec, a, grid=None, rtol=RTOL, atol=ATOL):
    """Integrate from the origin with u(0) = a out to r = 1.

    Returns a profile on ``grid`` (default: geometric from 1e-6) with
    u_rr and u_rrr filled in from the ODE whenever lambda > 0.
    """
    if not a > 0.0:
        raise DomainError(f"amplitude must be positive, got {a}")
    spec.require_minimal_branch()
    grid = grid or default_grid()
    N, p, lam, f = spec.N, spec.p, spec.lam, spec.f
    r = grid.nodes
    r0, sol = _integrate(N, p, lam, f, a, t_eval=np.log(r), rtol=rtol, atol=atol)
    if sol.status == 1 and sol.t_events[0].size:
        raise IntegrationBlowUp(
            f"u left the domain of f at r = {math.exp(sol.t_events[0][0]):.6g}",
            radius=math.exp(sol.t_events[0][0]),
        )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        radius = math.exp(sol.t[-1]) if sol.t.size else r0
        raise IntegrationBlowUp(f"integration failed near r = {radius:.6g}: {sol.message}", radius=radius)
    below = r < r0
    u = np.empty_like(r)
    psi = np.empty_like(r)
    u[below], psi[below] = _series(N, p, lam, f, a, r[below])
    u[~below], psi[~below] = sol.y[0], sol.y[1]
    psi = np.maximum(psi, 0.0)
    u_r = -((r * psi) ** (1.0 / (p - 1.0)))
    w = -(r**N) * psi
    profile = RadialProfile(
        grid=grid, u=u, u_r=u_r, w=w, N=N, p=p, spec=spec,
        meta={"source": "ivp", "amplitude": a, "lambda": lam, "r_start": r0},
    )
    if lam > 0.0:
        profile = derivatives_from_ode(profile, spec.g)
    return profile


def integrate_from_state(spec, r0, u0, w0, grid, rtol=RTOL, atol=ATOL):
    """Integrate from a prescribed state (u, w) at r0 out to r = 1.

    The returned profile lives on the grid nodes >= r0.
    """
    nodes = grid.nodes[grid.nodes >= r0]
    if nodes.size < 2 or not r0 > 0.0:
        raise DomainError("start radius must be positive and leave at least two grid nodes")
    N, p, lam, f = spec.N, spec.p, spec.lam, spec.f
    psi0 = -w0 / r0**N
    _, sol = _integrate(N, p, lam, f, None, t_eval=np.log(nodes), rtol=rtol, atol=atol,
                        start=(r0, u0, psi0))
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        radius = math.exp(sol.t[-1]) if sol.t.size else r0
        raise IntegrationBlowUp(f"integration failed near r = {radius:.6g}", radius=radius)
    sub = RadialGrid(nodes)
    u, psi = sol.y[0], np.maximum(sol.y[1], 0.0)
    u_r = -((nodes * psi) ** (1.0 / (p - 1.0)))
    profile = RadialProfile(
        grid=sub, u=u, u_r=u_r, w=-(nodes**N) * psi, N=N, p=p, spec=spec,
        meta={"source": "ivp-state", "r_start": r0},
    )
    return derivatives_from_ode(profile, spec.g) if lam > 0.0 else profile


def _mismatch(N, p, f, a, lam, rtol=RTOL):
    """u(1; a, lam), continued below U_FLOOR by -(1 - r_hit) so it stays monotone."""
    _, sol = _integrate(N, p, lam, f, a, floor=U_FLOOR, rtol=rtol)
    if sol.status == 1:
        hits = [te for te in sol.t_events if te.size]
        t_hit = min(te[0] for te in hits)
        return U_FLOOR - (1.0 - math.exp(t_hit))
    if sol.status != 0:
        raise IntegrationBlowUp(sol.message, radius=math.exp(sol.t[-1]))
    return float(sol.y[0, -1])


@dataclass(frozen=True)
class ShootResult:
    lam: float
    profile: RadialProfile
    evaluations: int


def shoot_lambda(N, p, f, a, grid=None, lambda_lo=LAMBDA_MIN_SEARCH,
                 lambda_max=LAMBDA_MAX_SEARCH, shoot_tol=1e-9):
    """Find lambda with u(1) = 0 for the IVP starting at amplitude a.

    lambda is doubled from ``lambda_lo`` until u(1) changes sign, then the
    bracket is closed with Brent's method; the first (smallest) bracketed
    root is returned, which selects the minimal solution.
    """
    if not a > 0.0:
        raise DomainError(f"amplitude must be positive, got {a}")
    ProblemSpec(N, p, 1.0, f).require_minimal_branch()
    calls = [0]

    def F(lam):
        calls[0] += 1
        return _mismatch(N, p, f, a, lam)

    lo = lambda_lo
    while F(lo) <= 0.0:
        if lo <= LAMBDA_MIN_SEARCH:
            raise NoMatch(f"u(1) <= 0 already at lambda = {lo:g} for a = {a:g}")
        lo = max(lo / 4.0, LAMBDA_MIN_SEARCH)
    hi = lo
    while True:
        hi = 2.0 * hi
        if hi > lambda_max:
            raise NoMatch(f"no sign change of u(1) for lambda in ({lambda_lo:g}, {lambda_max:g}], a = {a:g}")
        if F(hi) < 0.0:
            break
        lo = hi
    lam = brentq(F, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    profile = integrate_ivp(ProblemSpec(N, p, lam, f), a, grid=grid)
    mismatch = float(profile.u[-1])
    if abs(mismatch) > shoot_tol * max(1.0, a):
        raise NoMatch(f"shooting stalled with u(1) = {mismatch:.3g} at a = {a:g}")
    profile = profile.with_meta(mismatch=mismatch, source="shoot")
    return ShootResult(lam=lam, profile=profile, evaluations=calls[0])


@dataclass(frozen=True, eq=False)
class Branch:
    """Samples (a, lambda(a)) of the minimal branch, ordered by amplitude."""

    N: int
    p: float
    f: object
    amplitudes: np.ndarray
    lambdas: np.ndarray
    lambda_star_estimate: float = math.nan
    lambda_star_uncertainty: float = math.nan
    mode: str = ""
    partial: bool = False
    ordering_verified: bool = True
    profiles: tuple = field(default=(), repr=False)

    @property
    def points(self):
        return list(zip(self.amplitudes.tolist(), self.lambdas.tolist()))


def trace_branch(N, p, f, a_min, a_max, steps, grid=None, keep_profiles=True):
    """lambda(a) on a log-spaced amplitude ladder, plus a lambda* estimate."""
    if not 0.0 < a_min < a_max:
        raise DomainError("need 0 < a_min < a_max")
    if steps < 2:
        raise DomainError("need at least two amplitudes")
    grid = grid or default_grid()
    amps, lams, profiles = [], [], []
    partial = False
    hint = LAMBDA_MIN_SEARCH
    for a in np.geomspace(a_min, a_max, steps):
        try:
            res = shoot_lambda(N, p, f, float(a), grid=grid, lambda_lo=hint)
        except (NoMatch, IntegrationBlowUp) as exc:
            warnings.warn(f"branch truncated at a = {a:g}: {exc}", RuntimeWarning, stacklevel=2)
            partial = True
            break
        amps.append(float(a))
        lams.append(res.lam)
        profiles.append(res.profile)
        hint = max(LAMBDA_MIN_SEARCH, res.lam / 4.0)
    amps = np.array(amps)
    lams = np.array(lams)
    ordered = _minimal_ordering(lams, profiles)
    lam_star, unc, mode = math.nan, math.nan, ""
    if amps.size >= 5:
        lam_star, unc, mode = _estimate(amps, lams)
    return Branch(
        N=N, p=p, f=f, amplitudes=amps, lambdas=lams,
        lambda_star_estimate=lam_star, lambda_star_uncertainty=unc, mode=mode,
        partial=partial, ordering_verified=ordered,
        profiles=tuple(profiles) if keep_profiles else (),
    )


def _minimal_ordering(lams, profiles, slack=1e-8):
    """u_{lam1} <= u_{lam2} + slack on the rising part of the branch."""
    if lams.size < 2:
        return True
    top = int(np.argmax(lams))
    for i in range(top):
        if lams[i + 1] > lams[i] and np.any(profiles[i].u > profiles[i + 1].u + slack):
            return False
    return True


def _estimate(amps, lams):
    i = int(np.argmax(lams))
    n = lams.size
    if 0 < i < n - 1 and lams[-1] < lams[i] * (1.0 - 1e-7):
        x = np.log(amps[i - 1:i + 2])
        c2, c1, c0 = np.polyfit(x, lams[i - 1:i + 2], 2)
        est = c0 - c1 * c1 / (4.0 * c2) if c2 < 0.0 else lams[i]
        est = max(est, lams[i])
        return float(est), float(est - lams[i]), "fold"
    l0, l1, l2 = lams[-3:]
    d1, d2 = l1 - l0, l2 - l1
    est = l2
    if d2 > 0.0 and d1 > d2 and abs(d2) > 1e-13 * abs(l2):
        est = l2 + d2 * d2 / (d1 - d2)
    est = max(est, float(np.max(lams)))
    return float(est), float(est - np.max(lams)), "saturating"


def estimate_lambda_star(branch):
    """(lambda*, uncertainty) from a fold fit or tail extrapolation."""
    if branch.amplitudes.size < 5:
        raise DomainError(f"need at least 5 branch points, got {branch.amplitudes.size}")
    lam, unc, _ = _estimate(branch.amplitudes, branch.lambdas)
    return lam, unc


def minimal_solution(spec, grid=None, a_start=1e-2, growth=1.6, a_cap=1e4):
    """Minimal solution at the given lambda, located by amplitude search."""
    spec.require_minimal_branch()
    target = spec.lam
    if not target > 0.0:
        raise DomainError("minimal solution search needs lambda > 0")
    N, p, f = spec.N, spec.p, spec.f
    cache = {}

    def lam_of(a):
        if a not in cache:
            cache[a] = shoot_lambda(N, p, f, a, grid=grid).lam
        return cache[a]

    a = a_start
    while lam_of(a) >= target:
        a /= 10.0
        if a < 1e-12:
            raise NoMatch("lambda too small to bracket an amplitude")
    prev_a, prev_lam = a, lam_of(a)
    while True:
        a = prev_a * growth
        if a > a_cap:
            raise NoMatch(f"no minimal solution found up to a = {a_cap:g}")
        lam_a = lam_of(a)
        if lam_a >= target:
            break
        if lam_a < prev_lam:
            raise NoMatch(f"lambda = {target:g} lies above the fold value ~{prev_lam:g}")
        prev_a, prev_lam = a, lam_a
    a_sol = brentq(lambda x: lam_of(x) - target, prev_a, a, xtol=1e-13, rtol=1e-13)
    profile = integrate_ivp(spec, a_sol, grid=grid)
    return profile.with_meta(source="minimal", amplitude=a_sol)


def extremal_approximation(branch):
    """Stand-in for u* taken from a traced branch.

    At a fold the amplitude maximising lambda is refined and its profile
    returned; for a saturating branch the profile at the largest amplitude
    is used.  ``meta['r_reliable']`` is the smallest radius beyond which
    u_r at the two largest amplitudes agrees to 1%.
    """
    if not branch.profiles:
        raise DomainError("branch was traced without profiles")
    if branch.amplitudes.size < 5:
        raise DomainError("need at least 5 branch points")
    lam_star, _, mode = _estimate(branch.amplitudes, branch.lambdas)
    grid = branch.profiles[-1].grid
    if mode == "fold":
        i = int(np.argmax(branch.lambdas))
        lo, hi = branch.amplitudes[i - 1], branch.amplitudes[i + 1]
        res = minimize_scalar(
            lambda a: -shoot_lambda(branch.N, branch.p, branch.f, a, grid=grid).lam,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-7 * hi},
        )
        shot = shoot_lambda(branch.N, branch.p, branch.f, float(res.x), grid=grid)
        return shot.profile.with_meta(
            source="extremal-fold", a_max=float(res.x), r_reliable=grid.r_min,
            lambda_star_estimate=max(lam_star, shot.lam),
        )
    last, prev = branch.profiles[-1], branch.profiles[-2]
    rel = np.abs(last.u_r - prev.u_r) / np.abs(last.u_r)
    bad = np.nonzero(rel > 0.01)[0]
    r_reliable = float(grid.nodes[bad[-1] + 1]) if bad.size else grid.r_min
    return last.with_meta(
        source="extremal-tail", a_max=float(branch.amplitudes[-1]), r_reliable=r_reliable,
        lambda_star_estimate=lam_star,
    )


def derivatives_from_ode(profile, g):
    """u_rr and u_rrr from the equation itself (no differencing).

    u_rr  = -( g |u_r|^(2-p) + (N-1) u_r / r ) / (p-1)
    u_rrr = -( g' u_r |u_r|^(2-p) - (p-2) u_r u_rr g / |u_r|^p
               - (N-1) u_r / r^2 + (N-1) u_rr / r ) / (p-1)
    """
    r, u_r = profile.r, profile.u_r
    N, p = profile.N, profile.p
    flat = np.nonzero(~(u_r < 0.0))[0]
    if flat.size:
        i = int(flat[0])
        raise DegenerateError(
            f"u_r = {u_r[i]:g} is not negative at node {i} (r = {r[i]:.6g})", node=i, radius=float(r[i])
        )
    gs = np.asarray(g(profile.u), dtype=float)
    gp = np.asarray(g.derivative(profile.u), dtype=float)
    v = -u_r
    u_rr = -(gs * v ** (2.0 - p) + (N - 1.0) * u_r / r) / (p - 1.0)
    u_rrr = -(
        gp * u_r * v ** (2.0 - p)
        - (p - 2.0) * u_r * u_rr * gs / v**p
        - (N - 1.0) * u_r / r**2
        + (N - 1.0) * u_rr / r
    ) / (p - 1.0)
    return profile.with_derivatives(u_rr, u_rrr)


def derivative_weights(x, order=1, width=5):
    """Finite-difference weights for d/dx on a nonuniform grid.

    Row i holds the weights for node i over the stencil starting at
    ``start[i]``; stencils are centred except near the ends.
    """
    n = x.size
    width = min(width, n)
    half = width // 2
    start = np.clip(np.arange(n) - half, 0, n - width)
    idx = start[:, None] + np.arange(width)[None, :]
    scale = np.maximum(x[idx[:, -1]] - x[idx[:, 0]], np.finfo(float).tiny)
    d = (x[idx] - x[:, None]) / scale[:, None]
    V = d[:, None, :] ** np.arange(width)[None, :, None]
    rhs = np.zeros((n, width))
    rhs[:, order] = math.factorial(order)
    wts = np.linalg.solve(V, rhs[:, :, None])[:, :, 0]
    return idx, wts / scale[:, None] ** order


def residual(profile, g):
    """sup over nodes of |w' + r^(N-1) g(u)| with w' from 5-point differences."""
    r = profile.r
    idx, wts = derivative_weights(r)
    dw = np.sum(wts * profile.w[idx], axis=1)
    defect = dw + r ** (profile.N - 1) * np.asarray(g(profile.u), dtype=float)
    return float(np.max(np.abs(defect)))
