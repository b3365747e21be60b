import math

import mpmath as mp
import numpy as np
import pytest

from plaplace.core import (Exponential, ExtremalKind, PowerShift, ProblemSpec, Regime, Sampled, Zero,
                           critical_dimension, energy, exact_extremal, exponent_set, grad_norm, omega,
                           power_exponent_m, regime)
from plaplace.errors import DomainError
from plaplace.profile import RadialGrid, RadialProfile
from plaplace.radial_solver import residual

mp.mp.dps = 40


def alpha_oracle(N, p):
    N, p = mp.mpf(N), mp.mpf(p)
    return (N - 2 * mp.sqrt((N - 1) / (p - 1)) - p - 2) / p


def m_oracle(N, p):
    N, p = mp.mpf(N), mp.mpf(p)
    num = (p - 1) * N - 2 * mp.sqrt((p - 1) * (N - 1)) - p + 2
    return num / (N - 2 * mp.sqrt((N - 1) / (p - 1)) - p - 2)


def lambda_star_oracle(N, p):
    m = m_oracle(N, p)
    N, p = mp.mpf(N), mp.mpf(p)
    return (p / (m - (p - 1))) ** (p - 1) * (N - m * p / (m - (p - 1)))


@pytest.mark.parametrize("p, expected", [(2.0, 10.0), (3.0, 9.0), (1.5, 13.5)])
def test_critical_dimension_values(p, expected):
    assert critical_dimension(p) == pytest.approx(expected, rel=1e-15)


def test_critical_dimension_rejects_p_le_one():
    with pytest.raises(DomainError):
        critical_dimension(1.0)


@pytest.mark.parametrize("N, p, expected", [(10, 2.0, 0.0), (11, 2.0, 0.33772), (12, 3.0, 0.76986)])
def test_alpha_against_high_precision(N, p, expected):
    a = exponent_set(N, p).alpha
    assert a == pytest.approx(float(alpha_oracle(N, p)), abs=1e-14)
    assert a == pytest.approx(expected, abs=5e-6)


def test_deriv_exponent_matches_first_derivative_formula():
    ex = exponent_set(11, 2.0)
    assert ex.deriv_exponent(1) == pytest.approx((11 - 2 * math.sqrt(10) - 2) / 2, abs=1e-14)
    assert ex.deriv_exponent(3) - ex.deriv_exponent(1) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        ex.deriv_exponent(4)


def test_regime_dispatch():
    assert regime(10, 2.0) is Regime.CRITICAL
    assert regime(9, 3.0) is Regime.CRITICAL
    assert regime(3, 2.0) is Regime.SUBCRITICAL
    assert regime(11, 2.0) is Regime.SUPERCRITICAL


def test_power_closed_form_constants():
    m = power_exponent_m(11, 2.0)
    assert m == pytest.approx(float(m_oracle(11, 2)), rel=1e-14)
    # quoted as 6.92204; the oracle gives 6.9220246
    assert m == pytest.approx(6.92204, rel=1e-5)
    cf = exact_extremal(ExtremalKind.POWER_SUPERCRITICAL, 11, 2.0)
    assert cf.lambda_star == pytest.approx(float(lambda_star_oracle(11, 2)), rel=1e-13)
    # the quoted 2.92546 is a rounding of 2.925444...
    assert cf.lambda_star == pytest.approx(2.92546, rel=1e-5)


@pytest.mark.parametrize("N, p, lam", [(10, 2.0, 16.0), (9, 3.0, 54.0)])
def test_exponential_closed_form(N, p, lam):
    cf = exact_extremal(ExtremalKind.EXPONENTIAL_CRITICAL, N, p)
    r = cf.profile.r
    assert cf.lambda_star == pytest.approx(lam, rel=1e-15)
    assert np.allclose(cf.profile.u, -p * np.log(r), rtol=1e-15, atol=0)
    assert cf.profile.u[-1] == 0.0
    assert np.all(cf.profile.u_r < 0.0)


def test_closed_forms_residual(exp_critical, power_super):
    assert residual(exp_critical.profile, exp_critical.profile.spec.g) < 1e-8
    assert residual(power_super.profile, power_super.profile.spec.g) < 1e-8


def test_closed_form_dimension_mismatch():
    with pytest.raises(DomainError):
        exact_extremal(ExtremalKind.EXPONENTIAL_CRITICAL, 11, 2.0)
    with pytest.raises(DomainError):
        exact_extremal(ExtremalKind.POWER_SUPERCRITICAL, 10, 2.0)


def test_problem_spec_validation():
    with pytest.raises(DomainError):
        ProblemSpec(1, 2.0, 1.0, Exponential())
    with pytest.raises(DomainError):
        ProblemSpec(3, 1.0, 1.0, Exponential())
    with pytest.raises(DomainError):
        ProblemSpec(3, 2.0, -1.0, Exponential())
    with pytest.raises(DomainError):
        ProblemSpec(3, 2.0, 1.0, PowerShift(0.5))
    with pytest.raises(DomainError):
        ProblemSpec(3, 2.0, 1.0, Zero()).require_minimal_branch()


def test_nonlinearity_derivatives():
    f = PowerShift(3.0)
    s = np.linspace(0.0, 2.0, 7)
    assert np.allclose(f(s), (1 + s) ** 3)
    assert np.allclose(f.derivative(s), 3 * (1 + s) ** 2)
    assert np.allclose(f.derivative(s, order=2), 6 * (1 + s))
    G = f.antiderivative(s)
    assert np.allclose(G - G[0], ((1 + s) ** 4 - 1) / 4)
    e = Exponential()
    assert np.allclose(e.derivative(s, order=2), np.exp(s))


def test_sampled_nonlinearity_is_monotone():
    s = np.linspace(0.0, 3.0, 13)
    g = Sampled(s, np.exp(s))
    fine = np.linspace(0.0, 3.0, 1001)
    assert np.all(np.diff(g(fine)) > 0.0)
    with pytest.raises(DomainError):
        Sampled(s[::-1], np.exp(s))


def test_omega_known_values():
    assert omega(2) == pytest.approx(2 * math.pi)
    assert omega(3) == pytest.approx(4 * math.pi)


def test_energy_of_zero_profile():
    grid = RadialGrid.geometric()
    prof = RadialProfile.from_derivative(grid, np.zeros(grid.count), np.zeros(grid.count), 3, 2.0)
    assert energy(prof, ProblemSpec(3, 2.0, 1.0, Exponential()).g) == 0.0


def test_energy_exponential_closed_form(exp_critical):
    # integrand: (1/2)(2/r)^2 - 16 (r^-2 - 1), times r^9
    oracle = omega(10) * mp.quad(lambda r: (2 / r**2 - 16 * (r**-2 - 1)) * r**9, [0.5, 1])
    val = energy(exp_critical.profile, exp_critical.profile.spec.g)
    assert val == pytest.approx(float(oracle), rel=1e-10)


def test_energy_power_closed_form_mesh_stable():
    coarse = exact_extremal(ExtremalKind.POWER_SUPERCRITICAL, 11, 2.0)
    fine = exact_extremal(ExtremalKind.POWER_SUPERCRITICAL, 11, 2.0, grid=coarse.profile.grid.refined())
    g = coarse.profile.spec.g
    assert energy(fine.profile, g) == pytest.approx(energy(coarse.profile, g), rel=1e-8, abs=1e-12)


def test_energy_annulus_additivity(power_super):
    prof, g = power_super.profile, power_super.profile.spec.g
    # G is normalised at the outer radius, so shift the inner piece by the constant G(u(3/4)) - G(u(1))
    whole = energy(prof, g, (0.5, 1.0))
    outer = energy(prof, g, (0.75, 1.0))
    it = prof.interpolant
    shift = float(g.antiderivative(it.u(0.75)) - g.antiderivative(0.0))
    inner_shifted = energy(prof, g, (0.5, 0.75)) - omega(11) * shift * (0.75**11 - 0.5**11) / 11
    assert whole == pytest.approx(outer + inner_shifted, rel=1e-9)


def test_grad_norm_exponential(exp_critical):
    oracle = (omega(10) * mp.quad(lambda r: 4 / r**2 * r**9, [0.5, 1])) ** 0.5
    assert grad_norm(exp_critical.profile) == pytest.approx(float(oracle), rel=1e-11)
