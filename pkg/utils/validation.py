"""
Config and Argument Validation
==============================

Checks command arguments and experiment configs against the schema
dictionaries of schemas/command_schemas.py. Every error names the dotted
path of the offending entry (``symbol.custom.delta``, ``pairs[0][1]``).

Besides the JSON types the schemas use one domain type, ``exponent``: a
Lebesgue exponent in [1, inf] written as a number, ``"inf"`` or a fraction
such as ``"4/3"``.
"""

import math
import re
from fractions import Fraction
from typing import Any, Callable, Dict, List

_INFINITE = ("inf", "infinity", "oo")


def parse_exponent(value: Any) -> float:
    """Read an exponent from config text: numbers, 'inf' or fractions like '4/3'."""
    if isinstance(value, bool):
        raise ValueError(f"Not an exponent: {value!r}")
    if isinstance(value, str):
        text = value.strip().lower()
        if text in _INFINITE:
            return math.inf
        return float(Fraction(text))
    return float(value)


def is_exponent(value: Any) -> bool:
    try:
        return parse_exponent(value) >= 1
    except (TypeError, ValueError, ZeroDivisionError):
        return False


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


_TYPES: Dict[str, Callable[[Any], bool]] = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": _is_number,
    "boolean": lambda v: isinstance(v, bool),
    "array": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
    "null": lambda v: v is None,
    "exponent": is_exponent,
}

_BOUNDS: Dict[str, Callable[[float, float], bool]] = {
    "minimum": lambda v, b: v >= b,
    "maximum": lambda v, b: v <= b,
    "exclusiveMinimum": lambda v, b: v > b,
    "exclusiveMaximum": lambda v, b: v < b,
}
_BOUND_SIGNS = {"minimum": ">=", "maximum": "<=", "exclusiveMinimum": ">", "exclusiveMaximum": "<"}


def validate_arguments(arguments: Dict[str, Any], schema: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate arguments against a command or config schema.

    Unknown top-level fields are refused unless the schema allows them.

    Args:
        arguments: The arguments to validate
        schema: The schema to validate against

    Returns:
        Dict with 'valid' boolean and 'errors' list
    """
    errors: List[str] = []
    _check_members(arguments, schema, "", errors, closed=not schema.get("additionalProperties", False))
    return {"valid": not errors, "errors": errors}


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _describe(value: Any) -> str:
    if isinstance(value, float) and not math.isfinite(value):
        return f"non-finite number {value}"
    return f"{type(value).__name__} {value!r}"


def _check_members(
    obj: Dict[str, Any], schema: Dict[str, Any], path: str, errors: List[str], closed: bool
) -> None:
    for key in schema.get("required", []):
        if key not in obj:
            errors.append(f"{_join(path, key)}: required field is missing")

    properties = schema.get("properties", {})
    for key, value in obj.items():
        if key in properties:
            _check_value(value, properties[key], _join(path, key), errors)
        elif closed:
            errors.append(f"{_join(path, key)}: unknown field")


def _check_value(value: Any, schema: Dict[str, Any], path: str, errors: List[str]) -> None:
    expected = schema.get("type")
    if expected is not None:
        names = [expected] if isinstance(expected, str) else list(expected)
        if not any(_TYPES[name](value) for name in names if name in _TYPES):
            wanted = " or ".join("exponent in [1, inf]" if n == "exponent" else n for n in names)
            errors.append(f"{path}: expected {wanted}, got {_describe(value)}")
            return

    if "enum" in schema and value not in schema["enum"]:
        choices = ", ".join(str(choice) for choice in schema["enum"])
        errors.append(f"{path}: {value!r} is not one of {choices}")

    if isinstance(value, str):
        if len(value) < schema.get("minLength", 0):
            errors.append(f"{path}: needs at least {schema['minLength']} characters")
        if "pattern" in schema and not re.match(schema["pattern"], value):
            errors.append(f"{path}: {value!r} does not match {schema['pattern']}")
    elif _is_number(value):
        for keyword, holds in _BOUNDS.items():
            if keyword in schema and not holds(value, schema[keyword]):
                errors.append(f"{path}: must be {_BOUND_SIGNS[keyword]} {schema[keyword]}, got {value}")
    elif isinstance(value, list):
        if len(value) < schema.get("minItems", 0):
            errors.append(f"{path}: needs at least {schema['minItems']} entries, got {len(value)}")
        if "maxItems" in schema and len(value) > schema["maxItems"]:
            errors.append(f"{path}: takes at most {schema['maxItems']} entries, got {len(value)}")
        if "items" in schema:
            for index, item in enumerate(value):
                _check_value(item, schema["items"], f"{path}[{index}]", errors)
    elif isinstance(value, dict):
        _check_members(value, schema, path, errors, closed=not schema.get("additionalProperties", True))
