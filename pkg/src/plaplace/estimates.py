"""Pointwise estimates and monotonicity statements checked on sampled profiles.

Statements with an explicit constant are hard pass/fail checks.  For the
others the smallest constant making the bound hold on the grid is fitted
(sup of solution side over bound side) and reported with its location.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Regime, exponent_set, grad_norm, hardy_root, regime, w1p_norm
from .errors import DomainError, RegimeError
from .quadrature import cumulative, power_tail

HARD_RTOL = 1e-9
MONOTONE_RTOL = 1e-10
SHARP_FRACTION = 0.1
MIN_FIT_NODES = 8


@dataclass(frozen=True)
class EstimateReport:
    statement_id: str
    regime: Regime
    fitted_constant: float = 0.0
    max_ratio_location: float = math.nan
    holds: bool = True
    sharp: bool = None
    skipped_reason: str = None
    tolerance: float = 0.0
    hard: bool = False
    details: dict = field(default_factory=dict)

    @property
    def skipped(self):
        return self.skipped_reason is not None


def _skip(statement_id, prof_regime, reason):
    return EstimateReport(statement_id, prof_regime, holds=True, skipped_reason=reason)


def _window(profile, lo=0.0, hi=1.0, include_hi=True):
    """Boolean mask of nodes in the checked range, honouring r_reliable."""
    r = profile.r
    lo = max(lo, float(profile.meta.get("r_reliable", 0.0)))
    mask = r >= lo
    mask &= (r <= hi) if include_hi else (r < hi)
    return mask


def _fitted(statement_id, profile, r, num, den, mask, sharp=False, tolerance=0.0, **details):
    """Report sup(num/den) over mask; with ``sharp`` also test the ratio near r -> 0."""
    reg = regime(profile.N, profile.p)
    if not np.any(mask):
        return _skip(statement_id, reg, "no grid nodes in the checked range")
    num = np.abs(num[mask])
    den = np.abs(den[mask])
    rr = r[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num == 0.0, 0.0, num / den)
    if not np.all(np.isfinite(ratio)):
        return EstimateReport(statement_id, reg, math.inf, float(rr[~np.isfinite(ratio)][0]), holds=False,
                              tolerance=tolerance, details={"reason": "bound side vanishes"})
    i = int(np.argmax(ratio))
    C = float(ratio[i])
    is_sharp = None
    if sharp:
        near = rr <= rr[0] * 100.0
        near_min = float(np.min(ratio[near])) if np.any(near) else math.nan
        is_sharp = bool(C > 0.0 and near_min >= SHARP_FRACTION * C)
        details["near_origin_min_ratio"] = near_min
    details["ratio_range"] = (float(np.min(ratio)), C)
    details["r_range"] = (float(rr[0]), float(rr[-1]))
    return EstimateReport(statement_id, reg, C, float(rr[i]), holds=True, sharp=is_sharp,
                          tolerance=tolerance, details=details)


def _hard(statement_id, profile, r, lhs, rhs, mask, rtol=HARD_RTOL, **details):
    """Pointwise lhs <= rhs (1 + rtol) at every masked node."""
    reg = regime(profile.N, profile.p)
    lhs, rhs, rr = lhs[mask], rhs[mask], r[mask]
    slack = rhs + rtol * np.abs(rhs)
    bad = np.nonzero(~(lhs <= slack))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0.0, 0.0, lhs / rhs)
    ok = np.isfinite(ratio)
    i = int(np.argmax(np.where(ok, ratio, -np.inf))) if np.any(ok) else 0
    details["violations"] = int(bad.size)
    if bad.size:
        details["first_violation_radius"] = float(rr[bad[0]])
    return EstimateReport(
        statement_id, reg, float(ratio[i]) if np.any(ok) else math.nan,
        float(rr[i]) if rr.size else math.nan, holds=bad.size == 0, tolerance=rtol, hard=True,
        details=details,
    )


def _g_samples(profile, g):
    u = profile.u
    return np.asarray(g(u), dtype=float), np.asarray(g.derivative(u), dtype=float)


def _hypotheses(profile, g, need_convex=False):
    """Which of g >= 0, g nondecreasing, g convex hold along the profile."""
    gs, gp = _g_samples(profile, g)
    out = {"nonnegative": bool(np.all(gs >= 0.0)), "nondecreasing": bool(np.all(gp >= 0.0))}
    if need_convex:
        try:
            g2 = np.asarray(g.derivative(profile.u, order=2), dtype=float)
            out["convex"] = bool(np.all(g2 >= -1e-12 * np.max(np.abs(g2), initial=1.0)))
        except (NotImplementedError, DomainError):
            out["convex"] = False
    return out


# --- integral and dyadic estimates ------------------------------------------


def left_integral(profile):
    """int_0^r |u_r|^p t^(N-1) dt at every node (power-law tail below r_min)."""
    N, p = profile.N, profile.p
    r = profile.r
    it = profile.interpolant
    F = np.abs(profile.u_r) ** p * r ** (N - 1)
    tail = power_tail(r[0], r[1], F[0], F[1])
    return tail + cumulative(lambda t: np.abs(it.u_r(t)) ** p * t ** (N - 1), r, rtol=1e-12)


def check_lemma21(profile):
    """Fitted K in int_0^r |u_r|^p t^(N-1) dt <= K ||grad u||^p r^(2s+2)."""
    N, p = profile.N, profile.p
    if N < p:
        raise RegimeError(f"integral estimate needs N >= p, got N={N}, p={p}")
    r = profile.r
    norm_p = grad_norm(profile) ** p
    if norm_p == 0.0:
        return EstimateReport("lemma21", regime(N, p), 0.0, float(r[-1]), holds=True)
    bound = norm_p * r ** (2.0 * hardy_root(N, p) + 2.0)
    return _fitted("lemma21", profile, r, left_integral(profile), bound, _window(profile), sharp=True)


def check_prop22(profile):
    """Fitted K' in |u(r) - u(r/2)| <= K' ||grad u|| r^(-alpha)."""
    N, p = profile.N, profile.p
    if N < p:
        raise RegimeError(f"dyadic estimate needs N >= p, got N={N}, p={p}")
    r = profile.r
    alpha = exponent_set(N, p).alpha
    norm = grad_norm(profile)
    mask = _window(profile, lo=2.0 * profile.grid.r_min)
    half = np.clip(r / 2.0, profile.grid.r_min, 1.0)
    diff = np.abs(profile.u - profile.interpolant.u(half))
    if norm == 0.0:
        return EstimateReport("prop22", regime(N, p), 0.0, float(r[-1]), holds=True)
    return _fitted("prop22", profile, r, diff, norm * r**-alpha, mask, sharp=True)


def check_theorem14(profile):
    """Fitted C for |u(r)| against the W^{1,p} annulus norm, by regime."""
    N, p = profile.N, profile.p
    r = profile.r
    reg = regime(N, p)
    norm = w1p_norm(profile)
    if norm == 0.0:
        return EstimateReport(f"theorem14.{_T14[reg]}", reg, 0.0, float(r[-1]), holds=True)
    if reg is Regime.SUBCRITICAL:
        bound = np.full_like(r, norm)
    elif reg is Regime.CRITICAL:
        bound = norm * (np.abs(np.log(r)) + 1.0)
    else:
        bound = norm * r ** -exponent_set(N, p).alpha
    return _fitted(f"theorem14.{_T14[reg]}", profile, r, profile.u, bound, _window(profile), sharp=True)


_T14 = {Regime.SUBCRITICAL: "i", Regime.CRITICAL: "ii", Regime.SUPERCRITICAL: "iii"}


def check_theorem15(profile, g):
    """Fitted constants for |d^k u/dr^k| <= C ||grad u|| r^(-(alpha+k)), k = 1, 2, 3, on (0, 1/2]."""
    N, p = profile.N, profile.p
    reg = regime(N, p)
    ids = ("theorem15.i", "theorem15.ii", "theorem15.iii")
    if reg is Regime.SUBCRITICAL:
        return [_skip(i, reg, f"needs N >= N_c; regime is {reg.value}") for i in ids]
    hyp = _hypotheses(profile, g, need_convex=True)
    needs = ("nonnegative", "nondecreasing", "convex")
    ex = exponent_set(N, p)
    norm = grad_norm(profile)
    r = profile.r
    mask = _window(profile, hi=0.5)
    out = []
    for k, (sid, need) in enumerate(zip(ids, needs), start=1):
        if not all(hyp[n] for n in needs[:k]):
            out.append(_skip(sid, reg, f"g is not {need} along the profile"))
            continue
        field_name = ("u_r", "u_rr", "u_rrr")[k - 1]
        values = getattr(profile, field_name)
        if values is None:
            out.append(_skip(sid, reg, f"profile has no {field_name}"))
            continue
        bound = norm * r ** -ex.deriv_exponent(k)
        out.append(_fitted(sid, profile, r, values, bound, mask, sharp=True, order=k))
    return out


# --- bounds on g, g' and u_rr ------------------------------------------------


def psi_transform_check(profile, rtol=1e-6):
    """Psi(rho) = N r^(N-1)|u_r|^(p-1) at rho = r^N: nonnegative, nondecreasing, concave.

    Slopes of Psi between nodes are formed without r^N (which underflows):
    slope = N (q psi_{i+1} - psi_i)/(q - 1) with q = (r_{i+1}/r_i)^N and
    psi = |u_r|^(p-1)/r.
    """
    N, p = profile.N, profile.p
    r = profile.r
    psi = np.abs(profile.u_r) ** (p - 1.0) / r
    q = (r[1:] / r[:-1]) ** N
    slope = N * (q * psi[1:] - psi[:-1]) / (q - 1.0)
    scale = float(np.max(np.abs(slope), initial=0.0))
    signed = -np.sign(profile.u_r) * psi
    nonneg = bool(np.all(signed >= 0.0))
    nondecr = bool(np.all(slope >= -rtol * scale))
    concave = bool(np.all(np.diff(slope) <= rtol * scale))
    return {"nonnegative": nonneg, "nondecreasing": nondecr, "concave": concave, "tolerance": rtol}


def check_lemma23(profile, g, gprime=None, stability=None):
    """Reports for g(u) <= N|u_r|^(p-1)/r (hard), |u_rr| <= (2N-1)/(p-1) |u_r|/r (hard)
    and the fitted M in g'(u) <= M |u_r|^(p-2)/r^2.

    ``gprime`` defaults to g.derivative; ``stability`` is a StabilityReport
    (computed on demand) required before fitting M.
    """
    N, p = profile.N, profile.p
    reg = regime(N, p)
    r = profile.r
    hyp = _hypotheses(profile, g, need_convex=True)
    gs = np.asarray(g(profile.u), dtype=float)
    gp = np.asarray((g.derivative if gprime is None else gprime)(profile.u), dtype=float)
    ur = np.abs(profile.u_r)
    mask = _window(profile)
    ids = ("lemma23.g_bound", "lemma23.urr_bound", "lemma23.gprime_bound")
    if not (hyp["nonnegative"] and hyp["nondecreasing"]):
        return [_skip(i, reg, "g must be nonnegative and nondecreasing along the profile") for i in ids]
    psi = psi_transform_check(profile)
    rep_g = _hard(ids[0], profile, r, gs, N * ur ** (p - 1.0) / r, mask, psi_transform=psi)
    if not all(psi[k] for k in ("nonnegative", "nondecreasing", "concave")):
        rep_g = EstimateReport(**{**rep_g.__dict__, "holds": False})
    if profile.u_rr is None:
        rep_urr = _skip(ids[1], reg, "profile has no u_rr")
    else:
        rep_urr = _hard(ids[1], profile, r, np.abs(profile.u_rr), (2.0 * N - 1.0) / (p - 1.0) * ur / r, mask)
    if not hyp["convex"]:
        rep_gp = _skip(ids[2], reg, "g is not convex along the profile")
    else:
        if stability is None:
            from .stability import min_eigenvalue

            cut = max(1e-4, profile.grid.r_min, float(profile.meta.get("r_reliable", 0.0)))
            stability = min_eigenvalue(profile, g.derivative if gprime is None else gprime, cut_radius=cut)
        if not stability.semi_stable:
            rep_gp = _skip(ids[2], reg, "semi-stability not certified")
        else:
            rep_gp = _fitted(ids[2], profile, r, gp * r**2, ur ** (p - 2.0), mask,
                             stability=stability.verdict.value)
    return [rep_g, rep_urr, rep_gp]


# --- monotonicity ------------------------------------------------------------


def _monotone(statement_id, profile, values, increasing, rtol=MONOTONE_RTOL):
    r = profile.r
    reg = regime(profile.N, profile.p)
    mask = _window(profile)
    v, rr = values[mask], r[mask]
    step = np.diff(v) if increasing else -np.diff(v)
    scale = np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
    bad = np.nonzero(step < -rtol * scale)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        worst_rel = np.where(scale > 0.0, np.maximum(-step, 0.0) / scale, 0.0)
    i = int(np.argmax(worst_rel)) if worst_rel.size else 0
    details = {"violations": int(bad.size)}
    if bad.size:
        details["first_violation_radius"] = float(rr[bad[0] + 1])
    return EstimateReport(statement_id, reg, float(worst_rel[i]) if worst_rel.size else 0.0,
                          float(rr[i + 1]) if worst_rel.size else math.nan, holds=bad.size == 0,
                          tolerance=rtol, hard=True, details=details)


def annulus_slopes(profile):
    """|u_r| at the grid nodes of [1/2, 1]."""
    r = profile.r
    sel = (r >= 0.5) & (r <= 1.0)
    if np.count_nonzero(sel) < 2:
        raise DomainError("grid has too few nodes on [1/2, 1]")
    return np.abs(profile.u_r[sel])


def check_lemma24(profile):
    """The four statements on r^(N-1)|u_r|^(p-1), r^(-1)|u_r|^(p-1) and |u_r| over [1/2, 1].

    i) and ii) use the signed quantities -|u_r|^(p-2) u_r r^(N-1) and
    -|u_r|^(p-2) u_r / r so a node with the wrong sign of u_r is caught.
    """
    N, p = profile.N, profile.p
    r = profile.r
    reg = regime(N, p)
    signed = -np.sign(profile.u_r) * np.abs(profile.u_r) ** (p - 1.0)
    rep_i = _monotone("lemma24.i", profile, signed * r ** (N - 1), increasing=True)
    rep_ii = _monotone("lemma24.ii", profile, signed / r, increasing=False)
    slopes = annulus_slopes(profile)
    hi, lo = float(np.max(slopes)), float(np.min(slopes))
    bound = 2.0 ** (N / (p - 1.0))
    ok = hi <= bound * lo * (1.0 + 1e-12)
    rep_iii = EstimateReport("lemma24.iii", reg, hi / lo if lo > 0.0 else (0.0 if hi == 0.0 else math.inf),
                             float(r[r >= 0.5][int(np.argmax(slopes))]), holds=bool(ok), tolerance=1e-12,
                             hard=True, details={"max": hi, "min": lo, "explicit_constant": bound})
    norm = grad_norm(profile)
    q = norm / lo if lo > 0.0 else (0.0 if norm == 0.0 else math.inf)
    rep_iv = EstimateReport("lemma24.iv", reg, q, math.nan, holds=math.isfinite(q),
                            details={"grad_norm": norm, "min_slope": lo})
    return [rep_i, rep_ii, rep_iii, rep_iv]


# --- extremal estimates ------------------------------------------------------


def check_theorem12(extremal_profile, f):
    """Five bounds on u* and its derivatives, normalised by min_{[1/2,1]} |u_r|.

    Returns one report per item i)-v); items outside their regime or
    hypotheses are skipped.  ``combined_constant`` gives the max over the
    fitted items as the estimate of the common constant.
    """
    prof = extremal_profile
    N, p = prof.N, prof.p
    reg = regime(N, p)
    r = prof.r
    m = float(np.min(annulus_slopes(prof)))
    ex = exponent_set(N, p)
    inner = _window(prof, include_hi=False)
    reports = []
    if reg is Regime.SUBCRITICAL and N >= p:
        reports.append(_fitted("theorem12.i", prof, r, prof.u, m * (1.0 - r), inner, normalised_by=m))
    else:
        reports.append(_skip("theorem12.i", reg, "needs p <= N < N_c"))
    if reg is Regime.CRITICAL:
        reports.append(_fitted("theorem12.ii", prof, r, prof.u, m * np.abs(np.log(r)), inner, sharp=True,
                               normalised_by=m))
    else:
        reports.append(_skip("theorem12.ii", reg, "needs N = N_c"))
    if reg is Regime.SUPERCRITICAL:
        reports.append(_fitted("theorem12.iii", prof, r, prof.u, m * (r**-ex.alpha - 1.0), inner, sharp=True,
                               normalised_by=m))
    else:
        reports.append(_skip("theorem12.iii", reg, "needs N > N_c"))
    full = _window(prof)
    if reg is Regime.SUBCRITICAL:
        reports.append(_skip("theorem12.iv", reg, "needs N >= N_c"))
        reports.append(_skip("theorem12.v", reg, "needs N >= N_c"))
        return reports
    parts = []
    for k, name in ((1, "u_r"), (2, "u_rr")):
        values = getattr(prof, name)
        if values is None:
            parts.append(_skip(f"theorem12.iv.k{k}", reg, f"profile has no {name}"))
        else:
            parts.append(_fitted(f"theorem12.iv.k{k}", prof, r, values, m * r ** -ex.deriv_exponent(k), full,
                                 sharp=True, normalised_by=m))
    live = [x for x in parts if not x.skipped]
    if live:
        worst = max(live, key=lambda x: x.fitted_constant)
        reports.append(EstimateReport("theorem12.iv", reg, worst.fitted_constant, worst.max_ratio_location,
                                      holds=all(x.holds for x in live), sharp=all(bool(x.sharp) for x in live),
                                      details={"k1": parts[0].__dict__, "k2": parts[1].__dict__}))
    else:
        reports.append(_skip("theorem12.iv", reg, "profile has no derivative samples"))
    convex = _convex_f(f, prof.u)
    if not convex:
        reports.append(_skip("theorem12.v", reg, "f is not convex along the profile"))
    elif prof.u_rrr is None:
        reports.append(_skip("theorem12.v", reg, "profile has no u_rrr"))
    else:
        reports.append(_fitted("theorem12.v", prof, r, prof.u_rrr, m * r ** -ex.deriv_exponent(3), full,
                               sharp=True, normalised_by=m))
    return reports


def _convex_f(f, u):
    try:
        return bool(np.all(np.asarray(f.derivative(u, order=2)) >= 0.0))
    except (NotImplementedError, DomainError):
        return False


def combined_constant(reports):
    """Max fitted constant over non-skipped reports (the shared-constant estimate)."""
    live = [x.fitted_constant for x in reports if not x.skipped]
    return max(live) if live else math.nan


# --- exponent fitting ----------------------------------------------------------


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    residual: float
    nodes: int


def fit_exponent(profile, field_name, window=(1e-4, 1e-2)):
    """Least-squares line through (log r, log|field|) over the window nodes."""
    lo, hi = window
    if not 0.0 < lo < hi < 0.5:
        raise DomainError(f"window must lie inside (0, 1/2), got {window}")
    values = profile.field(field_name)
    r = profile.r
    sel = (r >= lo) & (r <= hi)
    if np.count_nonzero(sel) < MIN_FIT_NODES:
        raise DomainError(f"only {np.count_nonzero(sel)} nodes in window; need {MIN_FIT_NODES}")
    y = np.abs(values[sel])
    if np.any(y <= 0.0):
        raise DomainError(f"{field_name} vanishes inside the window")
    x = np.log(r[sel])
    coef, res, *_ = np.polyfit(x, np.log(y), 1, full=True)
    rms = math.sqrt(float(res[0]) / x.size) if res.size else 0.0
    return PowerFit(float(coef[0]), float(coef[1]), rms, int(x.size))
