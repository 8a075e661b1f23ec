"""
Command Schema Definitions
==========================

JSON-schema-style definitions for every CLI subcommand and for the
experiment config document. Exponents are numbers, "inf" or fractions
such as "4/3".
"""

from typing import Any, Dict

BAND_NAMES = ["low", "mid", "high", "full"]
EXPERIMENT_KINDS = ["theorem", "crucial", "k12", "lemma_exp", "residual"]

_EXPONENT = {"type": "exponent", "description": "Lebesgue exponent in [1, inf]"}
_PAIR = {"type": "array", "items": _EXPONENT, "minItems": 2, "maxItems": 2}
_DIM = {"type": "integer", "minimum": 1, "maximum": 8, "description": "Spatial dimension n"}
_SYMBOL_ARGS = {
    "model": {"type": "string", "description": "Zoo model name"},
    "params": {"type": "object", "description": "Model parameters"},
    "dim": _DIM,
}


def get_symbol_schemas() -> Dict[str, Dict[str, Any]]:
    """Get symbol catalogue schemas."""
    return {
        "zoo": {
            "name": "zoo",
            "description": "List the catalogue of dissipation symbols",
            "inputSchema": {
                "type": "object",
                "properties": {"dim": _DIM},
                "required": []
            }
        },
        "mhcheck": {
            "name": "mhcheck",
            "description": "Screen a symbol's Mikhlin-Hormander conditions on its low and high bands",
            "inputSchema": {
                "type": "object",
                "properties": {
                    **_SYMBOL_ARGS,
                    "bands": {"type": "array", "items": {"type": "string", "enum": ["low", "high"]}, "minItems": 1},
                    "seed": {"type": "integer", "minimum": 0},
                },
                "required": ["model"]
            }
        }
    }


def get_kernel_schemas() -> Dict[str, Dict[str, Any]]:
    """Get kernel dump schemas."""
    return {
        "kernel": {
            "name": "kernel",
            "description": "Invert one banded kernel at one time and emit the radial profile CSV",
            "inputSchema": {
                "type": "object",
                "properties": {
                    **_SYMBOL_ARGS,
                    "band": {"type": "string", "enum": BAND_NAMES},
                    "t": {"type": "number", "exclusiveMinimum": 0},
                    "points": {"type": "integer", "minimum": 8},
                    "use_cache": {"type": "boolean"},
                    "seed": {"type": "integer", "minimum": 0},
                    "out": {"type": "string", "minLength": 1},
                },
                "required": ["model", "t"]
            }
        }
    }


def get_experiment_schemas() -> Dict[str, Dict[str, Any]]:
    """Get experiment schemas."""
    return {
        "crucial": {
            "name": "crucial",
            "description": "Operator norms of the oscillatory-diffusive multiplier as tau -> 0",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "n": _DIM,
                    "p": _EXPONENT,
                    "q": _EXPONENT,
                    "theta": {"type": "number", "exclusiveMinimum": 0},
                    "tau_start": {"type": "number", "exclusiveMinimum": 0},
                    "tau_stop": {"type": "number", "exclusiveMinimum": 0},
                    "points": {"type": "integer", "minimum": 8},
                    "tolerance_scale": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["n", "p", "q"]
            }
        },
        "sweep": {
            "name": "sweep",
            "description": "Sweep one band of a symbol's kernel in time and fit it against its prediction",
            "inputSchema": {
                "type": "object",
                "properties": {
                    **_SYMBOL_ARGS,
                    "band": {"type": "string", "enum": BAND_NAMES},
                    "p": _EXPONENT,
                    "q": _EXPONENT,
                    "t_start": {"type": "number", "exclusiveMinimum": 0},
                    "t_stop": {"type": "number", "exclusiveMinimum": 0},
                    "points": {"type": "integer", "minimum": 8},
                    "transform": {"type": "string", "enum": ["hankel", "fft"]},
                    "tolerance_scale": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["model", "band", "p", "q"]
            }
        },
        "run": {
            "name": "run",
            "description": "Run an experiment config and write sweeps.csv, verdicts.csv and summary.json",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "config": {"type": "string", "minLength": 1},
                    "out": {"type": ["string", "null"]},
                    "seed": {"type": ["integer", "null"], "minimum": 0},
                    "threads": {"type": ["integer", "null"], "minimum": 1},
                    "tolerance_scale": {"type": ["number", "null"], "exclusiveMinimum": 0},
                },
                "required": ["config"]
            }
        }
    }


def get_cache_schemas() -> Dict[str, Dict[str, Any]]:
    """Get cache maintenance schemas."""
    return {
        "cache_info": {
            "name": "cache_info",
            "description": "Report the profile cache location, entry count and size",
            "inputSchema": {"type": "object", "properties": {}, "required": []}
        },
        "cache_clear": {
            "name": "cache_clear",
            "description": "Delete every cached profile",
            "inputSchema": {"type": "object", "properties": {}, "required": []}
        }
    }


def get_all_command_schemas() -> Dict[str, Dict[str, Any]]:
    """Get all command schemas combined."""
    schemas: Dict[str, Dict[str, Any]] = {}
    schemas.update(get_symbol_schemas())
    schemas.update(get_kernel_schemas())
    schemas.update(get_experiment_schemas())
    schemas.update(get_cache_schemas())
    return schemas


def get_experiment_config_schema() -> Dict[str, Any]:
    """Schema of an experiment config document."""
    return {
        "type": "object",
        "properties": {
            "name": {"type": "string", "minLength": 1, "pattern": r"^[A-Za-z0-9_.-]+$"},
            "kind": {"type": "string", "enum": EXPERIMENT_KINDS},
            "symbol": {
                "type": "object",
                "properties": {
                    "model": {"type": "string"},
                    "params": {"type": "object"},
                    "custom": {
                        "type": "object",
                        "properties": {
                            "expression": {"type": "string", "minLength": 1},
                            "theta0": {"type": "number", "minimum": 0},
                            "theta1": {"type": "number", "minimum": 0},
                            "delta": {"type": "number", "exclusiveMinimum": 0},
                            "M": {"type": "number", "exclusiveMinimum": 0},
                            "a1": {"type": "number", "exclusiveMinimum": 0},
                            "radial": {"type": "boolean"},
                        },
                        "required": ["expression", "theta0", "theta1", "delta", "M"],
                        "additionalProperties": False
                    }
                },
                "additionalProperties": False
            },
            "bands": {"type": "array", "items": {"type": "string", "enum": BAND_NAMES}, "minItems": 1},
            "pairs": {"type": "array", "items": _PAIR, "minItems": 1},
            "dims": {"type": "array", "items": _DIM, "minItems": 1},
            "sweep": {
                "type": "object",
                "properties": {
                    "variable": {"type": "string", "enum": ["t", "tau"]},
                    "start": {"type": "number", "exclusiveMinimum": 0},
                    "stop": {"type": "number", "exclusiveMinimum": 0},
                    "points": {"type": "integer", "minimum": 8},
                },
                "required": ["variable", "start", "stop", "points"],
                "additionalProperties": False
            },
            "window": {"type": ["array", "null"], "items": {"type": "number", "exclusiveMinimum": 0},
                       "minItems": 2, "maxItems": 2},
            "quadrature": {
                "type": "object",
                "properties": {
                    "panel_rule": {"type": "integer", "minimum": 4},
                    "max_freq": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    "osc_resolution": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                    "target_abs_err": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    "target_rel_err": {"type": "number", "exclusiveMinimum": 0},
                    "envelope_drop": {"type": "number", "exclusiveMinimum": 0},
                    "engine": {"type": "string", "enum": ["auto", "panel", "trapezoid"]},
                },
                "additionalProperties": False
            },
            "tolerances": {
                "type": "object",
                "properties": {
                    "power": {"type": "number", "exclusiveMinimum": 0},
                    "lower_bound": {"type": "number", "exclusiveMinimum": 0},
                    "log_coefficient": {"type": "number", "exclusiveMinimum": 0},
                    "lemma_exp": {"type": "number", "exclusiveMinimum": 0},
                },
                "additionalProperties": False
            },
            "tolerance_scale": {"type": "number", "exclusiveMinimum": 0},
            "seed": {"type": "integer", "minimum": 0},
            "threads": {"type": "integer", "minimum": 1},
            "output": {"type": "string", "minLength": 1},
            "transform": {"type": "string", "enum": ["hankel", "fft"]},
            "use_cache": {"type": "boolean"},
            "theta": {"type": "number", "exclusiveMinimum": 0},
            "eta": {"type": "number", "minimum": 0},
            "r": _EXPONENT,
            "order": {"type": "integer", "minimum": 0},
            "margin": {"type": "number", "exclusiveMinimum": 0},
            "expect_no_claim": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "band": {"type": "string", "enum": BAND_NAMES},
                        "n": _DIM,
                        "pair": _PAIR,
                    },
                    "required": ["band"],
                    "additionalProperties": False
                }
            },
            "description": {"type": "string"},
        },
        "required": ["name", "kind", "sweep"],
        "additionalProperties": False
    }
