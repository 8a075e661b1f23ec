"""Tests for the dissipation symbol catalogue and its checks."""

import numpy as np
import pytest

from services.symbol_service import (
    SymbolError,
    check_dissipative,
    custom_symbol,
    mh_check,
    model_zoo,
    rotation_defect,
    symbol_fingerprint,
    zoo_catalog,
)


def test_catalog_lists_at_least_ten_models():
    names = [entry["name"] for entry in zoo_catalog(3)]
    assert len(names) >= 10
    assert "double_dispersion" in names
    assert "free_wave" in names


def test_catalog_entries_carry_regime_metadata():
    for entry in zoo_catalog(2):
        assert {"theta0", "theta1", "a1", "delta", "M", "tags"} <= set(entry)
        if "non-dissipative" not in entry["tags"]:
            assert entry["delta"] <= entry["M"] / 4


@pytest.mark.parametrize(
    "name, params",
    [
        ("no_such_model", {}),
        ("viscoelastic", {"theta": 1.0}),
        ("effective", {"theta": 1.5}),
        ("noneffective", {"theta": 0.5}),
        ("fractional", {"theta": -1.0}),
        ("modulated", {"kappa": 1.5}),
    ],
)
def test_invalid_models_are_refused(name, params):
    with pytest.raises(SymbolError):
        model_zoo(name, params, dim=3)


def test_viscoelastic_symbol_values_and_normalization():
    sym = model_zoo("viscoelastic", dim=3)
    rng = np.random.default_rng(1)
    xi = rng.standard_normal((200, 3))
    rho = np.linalg.norm(xi, axis=1)
    np.testing.assert_allclose(sym.evaluate(xi), rho**2, rtol=1e-14)
    np.testing.assert_allclose(sym.radial(rho), rho**2, rtol=1e-14)

    low = np.linspace(1e-6, sym.delta, 100)
    assert np.all(sym.radial(low) <= low)


def test_low_radius_is_the_largest_valid_dyadic_radius():
    # a = 1 >= 4|xi| exactly up to |xi| = 1/4
    sym = model_zoo("classical", dim=1)
    assert sym.delta == 0.25
    assert sym.big_m == 1.0
    assert model_zoo("viscoelastic", dim=3).delta == 1.0
    assert model_zoo("effective", {"theta": 0.5}, dim=3).delta == 1 / 16


def test_double_dispersion_value_at_unit_frequency():
    sym = model_zoo("double_dispersion", dim=3)
    assert sym.evaluate(np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])) == pytest.approx([0.5, 0.5], rel=1e-15)
    assert (sym.theta0, sym.theta1) == (2.0, 0.0)


def test_directional_limits_at_the_origin():
    sym = model_zoo("directional", dim=3)
    t = np.array([1e-3, 1e-6, 1e-9])
    minus = np.stack([-t, np.zeros_like(t), np.zeros_like(t)], axis=-1)
    plus = np.stack([t, np.zeros_like(t), np.zeros_like(t)], axis=-1)
    np.testing.assert_allclose(sym.evaluate(minus), 1.0, rtol=1e-15)
    np.testing.assert_allclose(sym.evaluate(plus), 3.0, rtol=1e-15)
    assert (sym.theta0, sym.theta1) == (0.0, 0.0)
    assert not sym.is_radial


def test_fractional_metadata():
    sym = model_zoo("fractional", {"theta": 0.5}, dim=2)
    assert sym.theta0 == 0.5
    assert sym.theta1 == 0.5
    assert sym.is_radial


@pytest.mark.parametrize("theta", [1.0, 1.5])
def test_plate_below_two_is_flagged_for_regularity_loss(theta):
    sym = model_zoo("plate", {"theta": theta}, dim=3)
    assert sym.has_tag("regularity-loss")
    assert sym.theta0 == theta
    assert sym.theta1 == 0.0


def test_plate_at_two_has_no_regularity_loss():
    sym = model_zoo("plate", {"theta": 2.0}, dim=3)
    assert not sym.has_tag("regularity-loss")
    assert (sym.theta0, sym.theta1) == (2.0, 0.0)


@pytest.mark.parametrize("name", [entry["name"] for entry in zoo_catalog(3)])
def test_zoo_symbols_are_dissipative_on_both_bands(name):
    sym = model_zoo(name, dim=3)
    if not sym.dissipative:
        with pytest.raises(SymbolError, match="not dissipative"):
            check_dissipative(sym)
        return
    check_dissipative(sym, samples=10_000)


def test_evaluate_checks_vector_length():
    sym = model_zoo("classical", dim=2)
    with pytest.raises(SymbolError):
        sym.evaluate(np.ones((4, 3)))


def test_fingerprint_is_stable_and_parameter_sensitive():
    a = model_zoo("fractional", {"theta": 0.5}, dim=3)
    b = model_zoo("fractional", {"theta": 0.5}, dim=3)
    c = model_zoo("fractional", {"theta": 0.75}, dim=3)
    d = model_zoo("fractional", {"theta": 0.5}, dim=2)
    assert symbol_fingerprint(a) == symbol_fingerprint(b)
    assert symbol_fingerprint(a) != symbol_fingerprint(c)
    assert symbol_fingerprint(a) != symbol_fingerprint(d)


def test_free_wave_is_a_non_dissipative_control():
    sym = model_zoo("free_wave", dim=3)
    assert not sym.dissipative
    assert sym.has_tag("control")
    with pytest.raises(SymbolError, match="not dissipative"):
        mh_check(sym, "low")


def test_custom_symbol_matches_catalogue_model():
    reference = model_zoo("viscoelastic", dim=3)
    custom = custom_symbol("rho**2", theta0=2.0, theta1=2.0, delta=reference.delta, big_m=reference.big_m, dim=3)
    rho = np.geomspace(1e-3, 1e3, 50)
    np.testing.assert_allclose(custom.radial(rho), reference.radial(rho), rtol=1e-14)
    assert (custom.delta, custom.big_m) == (1.0, 4.0)


@pytest.mark.parametrize(
    "delta, big_m, message",
    [
        (2.0, 8.0, "Low-band normalization"),
        (0.5, 2.0, "High-band normalization"),
        (2.0, 4.0, "overlap"),
        (0.0, 4.0, "positive"),
    ],
)
def test_custom_symbol_reverifies_supplied_radii(delta, big_m, message):
    with pytest.raises(SymbolError, match=message):
        custom_symbol("rho**2", theta0=2.0, theta1=2.0, delta=delta, big_m=big_m, dim=3)


def test_custom_symbol_rejects_foreign_names():
    with pytest.raises(SymbolError):
        custom_symbol("__import__('os').getpid() + rho", theta0=1.0, theta1=1.0, delta=0.25, big_m=1.0)


def test_custom_symbol_must_be_dissipative():
    with pytest.raises(SymbolError, match="not dissipative"):
        custom_symbol("rho - 1", theta0=1.0, theta1=1.0, delta=0.25, big_m=1.0)


@pytest.mark.parametrize("band", ["low", "high"])
def test_mh_check_passes_for_viscoelastic(band):
    report = mh_check(model_zoo("viscoelastic", dim=3), band, seed=0)
    assert report.passed
    assert report.max_order == 4
    assert report.lower_constant > 0
    assert len(report.per_order_constants) == 5
    assert report.failed_orders == []


def test_mh_check_flags_oscillating_high_band():
    sym = model_zoo("oscillating", {"theta": 1.5, "eta": 0.0}, dim=3)
    assert sym.has_tag("mh-proviso-violated")
    report = mh_check(sym, "high", seed=0)
    assert not report.passed
    assert report.failed_orders


def test_mh_check_flags_default_oscillating_symbol_with_eta():
    # (n + 1)(1 - eta) = 2 >= theta = 1.5: the fourth derivatives grow like |xi|^(1/2)
    sym = model_zoo("oscillating", dim=3)
    assert sym.has_tag("mh-proviso-violated")
    report = mh_check(sym, "high", seed=0)
    assert not report.passed
    assert 4 in report.failed_orders
    assert mh_check(sym, "low", seed=0).passed


def test_mh_check_passes_oscillating_symbol_within_its_proviso():
    sym = model_zoo("oscillating", {"theta": 1.5, "eta": 0.8}, dim=3)
    assert not sym.has_tag("mh-proviso-violated")
    assert mh_check(sym, "high", seed=0).passed


def _zoo_cases():
    for entry in zoo_catalog(3):
        if "non-dissipative" in entry["tags"]:
            continue
        for band in ("low", "high"):
            if band == "high" and "mh-proviso-violated" in entry["tags"]:
                continue
            yield entry["name"], band


@pytest.mark.parametrize("name, band", list(_zoo_cases()))
def test_zoo_metadata_passes_its_own_screen(name, band):
    sym = model_zoo(name, dim=3)
    report = mh_check(sym, band, seed=0)
    assert report.passed, f"failed orders {report.failed_orders}"
    assert report.lower_constant >= sym.a1 / 2 - 1e-12


def test_mh_check_fractional_three_halves_low_band():
    report = mh_check(model_zoo("fractional", {"theta": 1.5}, dim=3), "low", seed=0)
    assert report.passed
    assert report.lower_constant == pytest.approx(1.0, rel=1e-12)


def test_mh_check_directional_low_band_with_theta_zero():
    report = mh_check(model_zoo("directional", dim=3), "low", seed=0)
    assert report.passed
    assert report.theta == 0.0


@pytest.mark.parametrize("band", ["low", "high"])
def test_homogeneous_symbol_constants_are_shell_independent(band):
    report = mh_check(model_zoo("fractional", {"theta": 1.5}, dim=2), band, seed=0)
    for order, constants in enumerate(report.shell_constants):
        constants = np.asarray(constants)
        spread = np.max(constants) / np.min(constants) - 1.0
        assert spread <= 1e-6, f"order {order} varies by {spread:.3g}"


def test_log_damping_high_band_allows_logarithmic_growth():
    sym = model_zoo("log_damping", dim=3)
    report = mh_check(sym, "high", seed=0)
    assert report.passed
    assert report.theta > sym.theta1


def test_mh_check_is_reproducible_under_a_seed():
    sym = model_zoo("mixed", dim=2)
    first = mh_check(sym, "low", seed=7)
    second = mh_check(sym, "low", seed=7)
    assert first.to_dict() == second.to_dict()


def test_mh_check_rejects_unknown_band():
    with pytest.raises(SymbolError):
        mh_check(model_zoo("classical", dim=1), "mid")


def test_rotation_defect_separates_radial_and_anisotropic_symbols():
    assert rotation_defect(model_zoo("viscoelastic", dim=3)) < 1e-12
    assert rotation_defect(model_zoo("modulated", dim=3)) > 1e-3
