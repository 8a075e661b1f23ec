"""Tests for the mode-wise fundamental solution, its oracle and the localizers."""

import logging
import time

import numpy as np
import pytest

import config
from services.oscillator_service import (
    DAMPED,
    DEGENERATE,
    OVERDAMPED,
    Localizer,
    OracleError,
    SpectralKernel,
    asymptotic_profile,
    band_kernel,
    chi,
    eigenvalues,
    energy,
    g_closed,
    g_quadrature,
    khat,
    khat_dt,
    khat_dt_mode,
    khat_mode,
    localize,
    mid_band_constant,
    mode_state,
    ode_oracle,
    ode_trajectory,
    taylor_terms,
)
from services.symbol_service import SymbolError, model_zoo

logger = logging.getLogger(__name__)

ORACLE_STEPS = 8000


def _near_degenerate_draws(rng, count):
    omega = rng.uniform(0.1, 5.0, count)
    a = 2 * omega * (1 + rng.uniform(-1e-5, 1e-5, count))
    t = rng.uniform(0.0, 10.0, count)
    return a, omega, t


def test_closed_form_matches_rk4_oracle():
    rng = np.random.default_rng(2024)
    a = rng.uniform(0.0, 10.0, 1000)
    omega = rng.uniform(0.0, 10.0, 1000)
    t = rng.uniform(0.0, 10.0, 1000)
    a_deg, omega_deg, t_deg = _near_degenerate_draws(rng, 100)
    a = np.concatenate([a, a_deg])
    omega = np.concatenate([omega, omega_deg])
    t = np.concatenate([t, t_deg])

    start = time.perf_counter()
    k_ode, v_ode = ode_oracle(a, omega, t, ORACLE_STEPS)
    elapsed = time.perf_counter() - start
    logger.info(f"RK4 oracle over {a.size} draws took {elapsed:.2f}s")

    assert np.max(np.abs(khat_mode(a, omega, t) - k_ode)) <= 1e-6
    assert np.max(np.abs(khat_dt_mode(a, omega, t) - v_ode)) <= 1e-6
    assert elapsed <= 10.0


def test_oracle_refuses_coarse_steps():
    with pytest.raises(OracleError):
        ode_oracle(np.array([5.0]), np.array([5.0]), np.array([10.0]), 100)


def test_mode_state_regimes():
    assert mode_state(1.0, 1.0).regime == DAMPED
    assert mode_state(3.0, 1.0).regime == OVERDAMPED
    assert mode_state(2.0, 1.0).regime == DEGENERATE
    assert mode_state(3.0, 1.0).b == pytest.approx(2.25)


@pytest.mark.parametrize("a, omega", [(0.5, 2.0), (6.0, 1.0), (2.0, 1.0), (1e-8, 1e-4), (1e6, 1e-3)])
def test_eigenvalues_solve_characteristic_polynomial(a, omega):
    for lam in eigenvalues(a, omega):
        residual = lam * lam + a * lam + omega * omega
        assert abs(residual) <= 1e-12 * max(1.0, a * abs(lam), omega * omega)


def test_kernel_bounded_by_time():
    rng = np.random.default_rng(5)
    a = rng.uniform(0.0, 50.0, 20000)
    omega = rng.uniform(0.0, 50.0, 20000)
    t = rng.uniform(0.0, 20.0, 20000)
    assert np.all(np.abs(khat_mode(a, omega, t)) <= t * (1 + 1e-12))


@pytest.mark.parametrize("side", [1 - config.DEGENERATE_EPS, 1 + config.DEGENERATE_EPS])
def test_branch_switch_is_continuous(side):
    rng = np.random.default_rng(11)
    omega = rng.uniform(0.1, 10.0, 500)
    t = rng.uniform(0.0, 10.0, 500)
    switch = 2 * omega * side
    below = khat_mode(switch * (1 - 1e-14), omega, t)
    above = khat_mode(switch * (1 + 1e-14), omega, t)
    assert np.max(np.abs(below - above)) <= 1e-9


def test_kernel_at_exact_degeneracy_matches_limit():
    omega = np.array([0.5, 1.0, 3.0])
    t = np.array([1.0, 2.0, 4.0])
    expected = t * np.exp(-omega * t)
    np.testing.assert_allclose(khat_mode(2 * omega, omega, t), expected, rtol=1e-14)


def test_energy_decreases_along_oracle_trajectory():
    times, k, kdot = ode_trajectory(1.0, 2.0, 10.0, 2000)
    e = energy(kdot, k, 2.0)
    assert e[0] == pytest.approx(1.0)
    assert np.all(np.diff(e) <= 1e-10 * e[0])
    assert e[-1] < 1e-3


def test_energy_decreases_along_closed_form():
    t = np.linspace(0.0, 20.0, 4001)
    for a, omega in [(0.5, 3.0), (5.0, 1.0), (2.0, 1.0)]:
        e = energy(khat_dt_mode(a, omega, t), khat_mode(a, omega, t), omega)
        assert np.all(np.diff(e) <= 1e-12 * e[0])


def test_chi_cutoff_values():
    s = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    values = chi(s)
    assert values[0] == values[1] == values[2] == 1.0
    assert 0.0 < values[3] < 1.0
    assert values[4] == values[5] == 0.0
    assert np.all(np.diff(chi(np.linspace(0.0, 3.0, 301))) <= 0)


def test_partition_of_unity_is_exact():
    loc = Localizer(delta=0.25, big_m=1.0)
    rho = np.linspace(0.0, 4.0, 4001)
    total = loc.phi0(rho) + loc.mid(rho) + loc.phi1(rho)
    assert np.max(np.abs(total - 1.0)) <= 1e-15
    assert np.all(loc.phi0(rho[rho >= 4 * loc.delta]) == 0.0)
    assert np.all(loc.phi1(rho[rho <= loc.big_m]) == 0.0)


def test_band_kernels_sum_to_full_kernel():
    sym = model_zoo("viscoelastic", dim=3)
    low, mid, high = localize(SpectralKernel(sym))
    rho = np.linspace(0.0, 6.0, 2001)
    for t in (0.5, 5.0, 50.0):
        full = SpectralKernel(sym).radial(t, rho)
        parts = low.radial(t, rho) + mid.radial(t, rho) + high.radial(t, rho)
        assert np.max(np.abs(parts - full)) <= 8 * np.finfo(float).eps * max(np.max(np.abs(full)), 1e-300)


def test_localize_refuses_overlapping_radii():
    sym = model_zoo("classical", dim=1)
    with pytest.raises(ValueError):
        localize(SpectralKernel(sym), Localizer(delta=1.0, big_m=1.0))


def test_band_kernel_supports():
    sym = model_zoo("classical", dim=2)
    low = band_kernel(sym, "low")
    high = band_kernel(sym, "high")
    assert low.support() == (0.0, 4 * low.loc.delta)
    assert high.support()[0] == high.loc.big_m
    assert band_kernel(sym, "full").loc is None


def test_mid_band_constant():
    assert mid_band_constant(model_zoo("classical", dim=3)) > 0
    assert mid_band_constant(model_zoo("viscoelastic", dim=3)) > 0
    assert mid_band_constant(model_zoo("free_wave", dim=3)) == 0.0


def test_g_closed_form_matches_quadrature():
    b = np.linspace(0.0, 0.25, 101)
    assert np.max(np.abs(g_closed(b) - g_quadrature(b))) <= 1e-12
    np.testing.assert_allclose(np.sqrt(1 - b), 1 + b * g_closed(b), rtol=0, atol=1e-15)


def test_taylor_profile_needs_theta0_above_one():
    with pytest.raises(SymbolError):
        taylor_terms(model_zoo("classical", dim=3), 0)


def test_taylor_partial_sum_plus_residual_is_low_kernel():
    sym = model_zoo("viscoelastic", dim=3)
    profile = taylor_terms(sym, 2)
    rho = np.linspace(0.0, 4 * profile.loc.delta, 200)
    t = 20.0
    low = SpectralKernel(sym, "low", profile.loc).radial(t, rho)
    np.testing.assert_allclose(profile.partial_sum(t, rho) + profile.residual(t, rho), low, atol=1e-13)


def test_time_derivative_matches_finite_difference():
    sym = model_zoo("double_damping", dim=2)
    rng = np.random.default_rng(3)
    xi = rng.uniform(-3.0, 3.0, (200, 2))
    h = 1e-6
    central = (khat(sym, 2.0 + h, xi) - khat(sym, 2.0 - h, xi)) / (2 * h)
    assert np.max(np.abs(khat_dt(sym, 2.0, xi) - central)) <= 1e-6


def test_low_frequencies_follow_asymptotic_profile():
    sym = model_zoo("viscoelastic", dim=3)
    t = 100.0
    rho = np.linspace(0.0, 0.05, 201)
    exact = khat_mode(sym.radial(rho), rho, t)
    assert np.max(np.abs(exact - asymptotic_profile(sym, t, rho))) <= 1e-3 * t


def test_taylor_profile_default_cutoff_stays_inside_the_low_radius():
    sym = model_zoo("viscoelastic", dim=3)
    profile = taylor_terms(sym, 1)
    assert 4 * profile.loc.delta <= sym.delta
    rho = np.linspace(0.0, 4 * profile.loc.delta, 101)
    assert np.max(profile.b(rho)) <= 0.25
