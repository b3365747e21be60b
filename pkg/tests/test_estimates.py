import math
from dataclasses import replace

import numpy as np
import pytest

from plaplace.core import (Exponential, ExtremalKind, ProblemSpec, Regime, exact_extremal, exponent_set,
                           grad_norm, regime)
from plaplace.errors import DomainError, RegimeError
from plaplace.estimates import (check_lemma21, check_lemma23, check_lemma24, check_prop22, check_theorem12,
                                check_theorem14, check_theorem15, combined_constant, fit_exponent, left_integral,
                                psi_transform_check)
from plaplace.profile import RadialGrid, RadialProfile
from plaplace.radial_solver import extremal_approximation, shoot_lambda, trace_branch


def constant_profile(N=10, p=2.0):
    grid = RadialGrid.geometric()
    z = np.zeros(grid.count)
    return RadialProfile.from_derivative(grid, z + 1.0, z, N, p, u_rr=z, u_rrr=z)


def all_fitted(prof, g, f):
    reps = [check_lemma21(prof), check_prop22(prof), check_theorem14(prof)]
    reps += check_theorem15(prof, g) + check_lemma23(prof, g)[2:] + check_lemma24(prof)[3:]
    reps += check_theorem12(prof, f)
    return {r.statement_id: r.fitted_constant for r in reps if not r.skipped}


def test_left_integral_closed_form(exp_critical):
    prof = exp_critical.profile
    r = prof.r
    assert np.allclose(left_integral(prof), r**8 / 2, rtol=1e-9, atol=0)
    rep = check_lemma21(prof)
    expected = 0.5 / grad_norm(prof) ** 2
    assert rep.fitted_constant == pytest.approx(expected, rel=1e-8)
    assert rep.sharp


def test_poincare_ratio_constant_profile_and_regime():
    assert check_lemma21(constant_profile()).fitted_constant == 0.0
    grid = RadialGrid.geometric(r_min=1e-3, n_geometric=100, n_uniform=100)
    z = np.zeros(grid.count)
    with pytest.raises(RegimeError):
        check_lemma21(RadialProfile.from_derivative(grid, z, z, 2, 3.0))


def test_dyadic_oscillation_critical_ratio_constant(exp_critical):
    prof = exp_critical.profile
    rep = check_prop22(prof)
    assert rep.fitted_constant == pytest.approx(2 * math.log(2) / grad_norm(prof), rel=1e-8)


def test_dyadic_oscillation_power_ratio_constant(power_super):
    prof = power_super.profile
    a = exponent_set(11, 2.0).alpha
    rep = check_prop22(prof)
    # |u(r) - u(r/2)| = r^-a (2^a - 1)
    assert rep.fitted_constant == pytest.approx((2**a - 1) / grad_norm(prof), rel=1e-6)


def test_dyadic_oscillation_subcritical_interior_max(minimal_n3):
    rep = check_prop22(minimal_n3[0])
    assert 1e-3 < rep.max_ratio_location < 1.0


def test_solution_bound_by_regime(exp_critical, power_super, minimal_n3):
    crit = check_theorem14(exp_critical.profile)
    assert crit.statement_id == "theorem14.ii" and crit.regime is Regime.CRITICAL and crit.sharp
    sup = check_theorem14(power_super.profile)
    assert sup.statement_id == "theorem14.iii" and sup.sharp
    sub = check_theorem14(minimal_n3[0])
    assert sub.statement_id == "theorem14.i" and math.isfinite(sub.fitted_constant)


def test_derivative_bounds_closed_forms(exp_critical, power_super, minimal_n3):
    reps = check_theorem15(exp_critical.profile, exp_critical.profile.spec.g)
    assert reps[0].fitted_constant == pytest.approx(2 / grad_norm(exp_critical.profile), rel=1e-10)
    pw = check_theorem15(power_super.profile, power_super.profile.spec.g)
    a = exponent_set(11, 2.0).alpha
    assert pw[1].fitted_constant == pytest.approx(a * (a + 1) / grad_norm(power_super.profile), rel=1e-10)
    sub = check_theorem15(minimal_n3[0], minimal_n3[1].g)
    assert all(r.skipped for r in sub)


def test_nonlinearity_and_curvature_bounds_closed_form(exp_critical):
    prof = exp_critical.profile
    g_rep, urr_rep, gp_rep = check_lemma23(prof, prof.spec.g)
    assert g_rep.hard and g_rep.holds
    assert g_rep.fitted_constant == pytest.approx(0.8, rel=1e-12)
    assert urr_rep.holds and urr_rep.fitted_constant == pytest.approx(2 / 38, rel=1e-12)
    assert gp_rep.fitted_constant == pytest.approx(16.0, rel=1e-12)


def test_nonlinearity_bound_zero_g(minimal_n3):
    prof, _ = minimal_n3
    reps = check_lemma23(prof, ProblemSpec(3, 2.0, 0.0, Exponential()).g)
    assert reps[0].holds and reps[0].fitted_constant == 0.0


def test_psi_transform_closed_form(exp_critical, minimal_n3):
    for prof in (exp_critical.profile, minimal_n3[0]):
        out = psi_transform_check(prof)
        assert out["nonnegative"] and out["nondecreasing"] and out["concave"]


def test_flux_and_slope_monotonicity_closed_form(exp_critical):
    i, ii, iii, iv = check_lemma24(exp_critical.profile)
    assert i.holds and ii.holds
    assert iii.fitted_constant == pytest.approx(2.0, rel=1e-12) and iii.holds
    assert iii.details["explicit_constant"] == 2.0**10
    assert math.isfinite(iv.fitted_constant)


def test_flux_monotonicity_constant_profile():
    i, ii, *_ = check_lemma24(constant_profile())
    assert i.holds and ii.holds


def test_flux_monotonicity_catches_sign_flip(minimal_n3):
    prof, _ = minimal_n3
    u_r = prof.u_r.copy()
    k = int(np.searchsorted(prof.r, 0.7))
    u_r[k] = -u_r[k]
    bad = replace(prof, u_r=u_r)
    i, ii, *_ = check_lemma24(bad)
    assert not (i.holds and ii.holds)


def test_extremal_bounds_exponential(exp_critical):
    reps = {r.statement_id: r for r in check_theorem12(exp_critical.profile, Exponential())}
    assert reps["theorem12.i"].skipped and reps["theorem12.iii"].skipped
    assert reps["theorem12.ii"].fitted_constant == pytest.approx(1.0, rel=1e-12)
    assert reps["theorem12.ii"].sharp


def test_extremal_bounds_power(power_super):
    reps = {r.statement_id: r for r in check_theorem12(power_super.profile, power_super.profile.spec.f)}
    a = exponent_set(11, 2.0).alpha
    # min |u_r| on [1/2, 1] is a, so u/(a (r^-a - 1)) = 1/a
    assert reps["theorem12.iii"].fitted_constant == pytest.approx(1 / a, rel=1e-10)
    assert reps["theorem12.iii"].sharp
    assert combined_constant(list(reps.values())) >= reps["theorem12.iii"].fitted_constant


def test_extremal_bound_subcritical_mesh_stable():
    grid = RadialGrid.geometric()
    fits = []
    for g in (grid, grid.refined()):
        br = trace_branch(3, 2.0, Exponential(), 0.2, 6.0, 14, grid=g)
        prof = extremal_approximation(br)
        rep = check_theorem12(prof, Exponential())[0]
        assert rep.statement_id == "theorem12.i" and not rep.skipped
        fits.append(rep.fitted_constant)
    assert fits[1] == pytest.approx(fits[0], rel=2e-2)


def test_fit_exponent_examples(exp_critical, power_super):
    fit = fit_exponent(exp_critical.profile, "u_r")
    assert fit.slope == pytest.approx(-1.0, abs=1e-6)
    a = exponent_set(11, 2.0).alpha
    assert fit_exponent(power_super.profile, "u_r").slope == pytest.approx(-(a + 1), abs=1e-6)
    # u = r^-a - 1 carries an offset; its local slope tends to -a as the window moves inward
    far = fit_exponent(power_super.profile, "u", window=(1e-8, 1e-7)).slope
    near = fit_exponent(power_super.profile, "u", window=(1e-3, 1e-2)).slope
    assert abs(far + a) < abs(near + a) < 0.1
    log_fit = fit_exponent(exp_critical.profile, "u")
    assert log_fit.residual > 1e3 * fit.residual + 1e-6


def test_fit_exponent_errors(exp_critical):
    with pytest.raises(DomainError):
        fit_exponent(exp_critical.profile, "u_r", window=(0.1, 0.6))
    coarse = exact_extremal(ExtremalKind.EXPONENTIAL_CRITICAL, 10, 2.0,
                            grid=RadialGrid.geometric(r_min=1e-3, n_geometric=20, n_uniform=70))
    with pytest.raises(DomainError):
        fit_exponent(coarse.profile, "u_r", window=(1e-3, 2e-3))


def test_regime_dispatch_total():
    for p in np.linspace(1.1, 9.9, 89):
        for N in range(2, 51):
            assert regime(N, float(p)) in tuple(Regime)


@pytest.mark.parametrize("kind, N, p", [(ExtremalKind.EXPONENTIAL_CRITICAL, 10, 2.0),
                                        (ExtremalKind.POWER_SUPERCRITICAL, 11, 2.0)])
def test_fitted_constants_mesh_stable_closed_forms(kind, N, p):
    coarse = exact_extremal(kind, N, p)
    fine = exact_extremal(kind, N, p, grid=coarse.profile.grid.refined())
    spec = coarse.profile.spec
    a = all_fitted(coarse.profile, spec.g, spec.f)
    b = all_fitted(fine.profile, spec.g, spec.f)
    assert a.keys() == b.keys()
    for key in a:
        assert b[key] == pytest.approx(a[key], rel=2e-2), key


def test_fitted_constants_mesh_stable_minimal():
    grid = RadialGrid.geometric()
    out = []
    for g in (grid, grid.refined()):
        res = shoot_lambda(3, 2.0, Exponential(), 0.5, grid=g)
        spec = ProblemSpec(3, 2.0, res.lam, Exponential())
        out.append(all_fitted(res.profile, spec.g, spec.f))
    for key in out[0]:
        assert out[1][key] == pytest.approx(out[0][key], rel=2e-2), key
