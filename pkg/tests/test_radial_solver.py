import math
import warnings

import numpy as np
import pytest

from plaplace.core import Exponential, PowerShift, ProblemSpec, power_exponent_m
from plaplace.errors import DegenerateError, DomainError, NoMatch
from plaplace.profile import RadialGrid, RadialProfile
from plaplace.radial_solver import (Branch, derivatives_from_ode, estimate_lambda_star, extremal_approximation,
                                    integrate_from_state, integrate_ivp, minimal_solution, residual,
                                    shoot_lambda, trace_branch)


def rk4_u_at_one(N, p, lam, f, a, h):
    """Independent fixed-step RK4 on (u, w) in r from a one-term start at r0 = 1e-3."""
    r0 = 1e-3
    c = lam * float(f(a)) / N
    y = np.array([a - c ** (1 / (p - 1)) * (p - 1) / p * r0 ** (p / (p - 1)), -c * r0**N])

    def F(r, y):
        u, w = y
        return np.array([-(abs(w) / r ** (N - 1)) ** (1 / (p - 1)), -lam * r ** (N - 1) * float(f(u))])

    n = int(round((1.0 - r0) / h))
    r = r0
    step = (1.0 - r0) / n
    for _ in range(n):
        k1 = F(r, y)
        k2 = F(r + step / 2, y + step / 2 * k1)
        k3 = F(r + step / 2, y + step / 2 * k2)
        k4 = F(r + step, y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r += step
    return y[0]


def test_zero_lambda_gives_constant():
    prof = integrate_ivp(ProblemSpec(3, 2.0, 0.0, Exponential()), 1.5)
    assert np.all(prof.u == 1.5)
    assert np.all(prof.w == 0.0)


def test_ivp_against_fixed_step_oracle():
    spec = ProblemSpec(3, 2.0, 1.0, Exponential())
    prof = integrate_ivp(spec, 1.0)
    oracle = rk4_u_at_one(3, 2.0, 1.0, Exponential(), 1.0, 2e-4)
    oracle_half = rk4_u_at_one(3, 2.0, 1.0, Exponential(), 1.0, 1e-4)
    assert abs(oracle - oracle_half) < 1e-10
    assert prof.u[-1] == pytest.approx(oracle_half, abs=1e-8)


def test_ivp_from_closed_form_state(exp_critical):
    spec = exp_critical.profile.spec
    grid = RadialGrid.geometric(r_min=1e-6)
    r0 = 1e-3
    prof = integrate_from_state(spec, r0, -2 * math.log(r0), -(r0**9) * 2 / r0, grid)
    assert np.max(np.abs(prof.u + 2 * np.log(prof.r))) < 1e-9
    assert residual(prof, spec.g) < 1e-8


def test_ivp_residual_below_ten_times_tolerance(minimal_n3):
    prof, spec = minimal_n3
    assert residual(prof, spec.g) < 1e-9


def test_flux_monotone_exactly(minimal_n3):
    prof, _ = minimal_n3
    assert np.all(prof.w <= 0.0)
    assert np.all(np.diff(-prof.w) >= 0.0)


def test_halving_tolerance_changes_u1_less_than_tolerance():
    spec = ProblemSpec(3, 2.0, 1.0, Exponential())
    coarse = integrate_ivp(spec, 1.0, rtol=1e-8, atol=1e-10).u[-1]
    fine = integrate_ivp(spec, 1.0, rtol=5e-9, atol=5e-11).u[-1]
    assert abs(coarse - fine) < 1e-8


def test_small_amplitude_branch_is_linear():
    # for p = 2 the small-amplitude limit is u = lam (1 - r^2)/(2N), so lam/a -> 2N
    lo = shoot_lambda(3, 2.0, Exponential(), 1e-3).lam
    hi = shoot_lambda(3, 2.0, Exponential(), 1e-2).lam
    assert 0.0 < lo < hi
    assert lo / 1e-3 == pytest.approx(6.0, rel=1e-2)


def test_shoot_large_amplitude_approaches_lambda_star():
    res = shoot_lambda(10, 2.0, Exponential(), 30.0)
    assert res.lam == pytest.approx(16.0, rel=1e-2)
    assert abs(res.profile.u[-1]) < 1e-8


def test_shoot_power_closed_form_amplitudes(power_super):
    m = power_exponent_m(11, 2.0)
    lam = shoot_lambda(11, 2.0, PowerShift(m), 10.0).lam
    assert lam == pytest.approx(power_super.lambda_star, rel=1e-2)


def test_shoot_no_match():
    with pytest.raises(NoMatch):
        shoot_lambda(3, 2.0, Exponential(), 1.0, lambda_max=1e-3)


def test_branch_fold_and_refinement():
    coarse = trace_branch(3, 2.0, Exponential(), 0.1, 10.0, 16, keep_profiles=False)
    fine = trace_branch(3, 2.0, Exponential(), 0.1, 10.0, 31, keep_profiles=False)
    assert coarse.mode == "fold"
    i = int(np.argmax(coarse.lambdas))
    assert 0 < i < coarse.lambdas.size - 1
    assert coarse.lambda_star_estimate >= np.max(coarse.lambdas)
    assert fine.lambda_star_estimate == pytest.approx(coarse.lambda_star_estimate, rel=1e-2)
    assert np.all(coarse.lambdas > 0.0)


def test_branch_critical_saturates():
    br = trace_branch(10, 2.0, Exponential(), 0.1, 30.0, 20)
    assert br.mode == "saturating"
    assert 15.84 <= br.lambda_star_estimate <= 16.16
    assert br.ordering_verified
    assert not br.partial


def test_branch_partial_on_failure():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        br = trace_branch(3, 2.0, PowerShift(3.0), 0.1, 1e5, 6, keep_profiles=False)
    assert br.amplitudes.size >= 1
    assert br.partial or br.amplitudes.size == 6


def test_estimate_needs_five_points():
    br = Branch(N=3, p=2.0, f=Exponential(), amplitudes=np.array([0.1, 0.2]), lambdas=np.array([0.5, 0.9]))
    with pytest.raises(DomainError):
        estimate_lambda_star(br)


def test_minimal_solution_hits_lambda():
    spec = ProblemSpec(3, 2.0, 1.0, Exponential())
    prof = minimal_solution(spec)
    assert abs(prof.u[-1]) < 1e-8
    assert prof.meta["amplitude"] < 1.5
    with pytest.raises(NoMatch):
        minimal_solution(ProblemSpec(3, 2.0, 10.0, Exponential()))


def test_extremal_approximation_carries_truncation():
    br = trace_branch(11, 2.0, PowerShift(power_exponent_m(11, 2.0)), 0.5, 30.0, 8)
    prof = extremal_approximation(br)
    assert prof.meta["a_max"] == pytest.approx(br.amplitudes[-1])
    assert prof.meta["r_reliable"] > prof.grid.r_min


def test_derivatives_from_ode_exponential(exp_critical):
    prof = exp_critical.profile
    derived = derivatives_from_ode(prof.with_derivatives(None, None), prof.spec.g)
    r = prof.r
    assert np.allclose(derived.u_rr, 2 / r**2, rtol=1e-12, atol=0)
    assert np.allclose(derived.u_rrr, -4 / r**3, rtol=1e-12, atol=0)


def test_derivatives_from_ode_power(power_super):
    prof = power_super.profile
    derived = derivatives_from_ode(prof.with_derivatives(None, None), prof.spec.g)
    assert np.allclose(derived.u_rr, prof.u_rr, rtol=1e-10, atol=0)
    assert np.allclose(derived.u_rrr, prof.u_rrr, rtol=1e-9, atol=0)


def test_derivatives_from_ode_degenerate():
    prof = integrate_ivp(ProblemSpec(3, 2.0, 0.0, Exponential()), 1.0)
    with pytest.raises(DegenerateError) as info:
        derivatives_from_ode(prof, ProblemSpec(3, 2.0, 0.0, Exponential()).g)
    assert info.value.node == 0


def test_residual_of_zero_profile():
    grid = RadialGrid.geometric()
    prof = RadialProfile.from_derivative(grid, np.zeros(grid.count), np.zeros(grid.count), 3, 2.0)
    assert residual(prof, ProblemSpec(3, 2.0, 2.5, Exponential()).g) == pytest.approx(2.5, rel=1e-12)
