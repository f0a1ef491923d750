"""Deterministic JSON: keys in insertion order, reals as 6-decimal fixed point.

Non-finite reals are written as ``null``, like any other undefined value.
"""

from __future__ import annotations

import json
import math

import numpy as np

FLOAT_DIGITS = 6


def format_real(value: float) -> str:
    text = f"{float(value):.{FLOAT_DIGITS}f}"
    if text.startswith("-") and not text.strip("-0."):
        text = text[1:]  # no negative zero
    return text


def _encode(value, indent: int, level: int) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)

    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            json.dumps(str(k), ensure_ascii=False) + ": " + _encode(v, indent, level + 1)
            for k, v in value.items()
        ]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        items = [_encode(v, indent, level + 1) for v in value]
        return "[" + pad + ("," + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(value, indent: int = 2) -> str:
    return _encode(value, indent, 0) + "\n"
