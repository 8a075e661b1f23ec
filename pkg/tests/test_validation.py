"""Tests for the schema checks of command arguments and experiment configs."""

import math

import pytest

from schemas.command_schemas import get_experiment_config_schema
from utils.validation import is_exponent, parse_exponent, validate_arguments


def config(**changes):
    data = {
        "name": "viscoelastic_low",
        "kind": "theorem",
        "symbol": {"model": "viscoelastic"},
        "bands": ["low"],
        "pairs": [[1, "inf"]],
        "dims": [3],
        "sweep": {"variable": "t", "start": 10, "stop": 1000, "points": 8},
    }
    data.update(changes)
    return data


def errors_of(data):
    return validate_arguments(data, get_experiment_config_schema())["errors"]


@pytest.mark.parametrize("text, expected", [("inf", math.inf), ("Infinity", math.inf), ("4/3", 4 / 3), (2, 2.0)])
def test_parse_exponent(text, expected):
    assert parse_exponent(text) == pytest.approx(expected)


@pytest.mark.parametrize("value", ["1/2", 0.5, "p", True, "1/0", None])
def test_values_outside_one_to_infinity_are_not_exponents(value):
    assert not is_exponent(value)


def test_valid_config_has_no_errors():
    assert errors_of(config()) == []


def test_errors_name_the_nested_path():
    data = config(symbol={"custom": {"expression": "rho**2", "theta0": 2, "theta1": 2, "delta": 0, "M": 4}})
    assert errors_of(data) == ["symbol.custom.delta: must be > 0, got 0"]


def test_missing_radius_of_a_custom_symbol():
    data = config(symbol={"custom": {"expression": "rho**2", "theta0": 2, "theta1": 2, "delta": 1}})
    assert errors_of(data) == ["symbol.custom.M: required field is missing"]


def test_pair_entries_are_checked_as_exponents():
    errors = errors_of(config(pairs=[[1, "inf"], ["1/2", 2]]))
    assert len(errors) == 1
    assert errors[0].startswith("pairs[1][0]: expected exponent in [1, inf]")


def test_unknown_top_level_field_is_refused():
    assert errors_of(config(bogus=1)) == ["bogus: unknown field"]


def test_non_finite_numbers_are_refused():
    data = config(sweep={"variable": "t", "start": 10, "stop": math.inf, "points": 8})
    assert errors_of(data) == ["sweep.stop: expected number, got non-finite number inf"]


def test_array_sizes_and_enums():
    errors = errors_of(config(bands=["low", "outer"], pairs=[]))
    assert "bands[1]: 'outer' is not one of low, mid, high, full" in errors
    assert "pairs: needs at least 1 entries, got 0" in errors
