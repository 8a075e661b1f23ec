"""
Response Formatting Utilities
=============================

This module formats command responses and writes the report files
(CSV tables and JSON summaries) deterministically and atomically.
"""

import csv
import io
import json
import math
import os
import tempfile
import traceback
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np


def json_default(obj: Any) -> Any:
    """JSON serializer for numpy scalars and arrays, fractions and paths."""
    if isinstance(obj, np.ndarray):
        return [json_default(x) if isinstance(x, np.generic) else x for x in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj)} is not JSON serializable")


def _finite(obj: Any) -> Any:
    """Replace non-finite floats, which JSON cannot carry, by strings."""
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def format_success_response(result: Any) -> str:
    """
    Format a successful command result.

    Args:
        result: The result to format

    Returns:
        Formatted JSON string
    """
    try:
        response: Dict[str, Any] = {"status": "success", "data": _finite(result)}
        if isinstance(result, list):
            response["count"] = len(result)
        response["timestamp"] = _timestamp()
        return json.dumps(response, default=json_default, indent=2)

    except Exception as e:
        return format_error_response(f"Error formatting response: {str(e)}")


def format_error_response(error: Union[str, Exception], include_traceback: bool = False) -> str:
    """
    Format an error response.

    Args:
        error: The error message or exception
        include_traceback: Whether to include full traceback

    Returns:
        Formatted JSON string
    """
    try:
        if isinstance(error, Exception):
            error_message = str(error)
            error_type = type(error).__name__
        else:
            error_message = str(error)
            error_type = "Error"

        response = {
            "status": "error",
            "error": {
                "type": error_type,
                "message": error_message
            },
            "timestamp": _timestamp()
        }

        if include_traceback and isinstance(error, Exception):
            response["error"]["traceback"] = traceback.format_exc()

        return json.dumps(response, indent=2)

    except Exception as e:
        return json.dumps({
            "status": "error",
            "error": {
                "type": "FormattingError",
                "message": f"Error formatting error response: {str(e)}"
            },
            "timestamp": _timestamp()
        }, indent=2)


def format_validation_error(errors: List[str]) -> str:
    """
    Format validation errors.

    Args:
        errors: List of validation error messages

    Returns:
        Formatted JSON string
    """
    response = {
        "status": "error",
        "error": {
            "type": "ValidationError",
            "message": "Input validation failed",
            "details": errors
        },
        "timestamp": _timestamp()
    }

    return json.dumps(response, indent=2)


def format_cell(value: Any) -> str:
    """One CSV cell: shortest round-trip floats, 'inf', empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating, Fraction)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def render_csv(columns: List[str], rows: Iterable[Dict[str, Any]], schema_version: Optional[int] = None) -> str:
    """CSV text with a schema-version row, a header row and one line per row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if schema_version is not None:
        writer.writerow(["# schema_version", schema_version])
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def render_json(data: Any) -> str:
    return json.dumps(_finite(data), default=json_default, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Union[str, Path], text: str) -> Path:
    """
    Write text to a temporary file in the target directory, then publish it
    with os.replace so readers never see a partial file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path
