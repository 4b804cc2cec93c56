"""Canonical JSON rendering and content hashing.

The canonical form fixes one byte sequence per document: object keys sorted
by code point at every level, no insignificant whitespace, numbers without
leading zeros, trailing fractional zeros, or exponents (so 50.0 and 50 render
identically), strings minimally escaped, UTF-8 output. NaN and infinity have
no canonical form and are rejected.
"""

from __future__ import annotations

import hashlib
import math
from decimal import Decimal
from typing import Any

from .errors import MalformedDocument, NonCanonicalizableNumber

# Minimal escaping: backslash, double quote, and the C0 control range. The
# two-character shorthands are used where JSON defines them.
_ESCAPES: dict[int, str] = {
    ord("\\"): "\\\\",
    ord('"'): '\\"',
    ord("\b"): "\\b",
    ord("\t"): "\\t",
    ord("\n"): "\\n",
    ord("\f"): "\\f",
    ord("\r"): "\\r",
}
for _cp in range(0x20):
    _ESCAPES.setdefault(_cp, f"\\u{_cp:04x}")


def _render_string(value: str) -> str:
    return '"' + value.translate(_ESCAPES) + '"'


def format_number(value: int | float | Decimal) -> str:
    """Render a number in canonical form.

    Integral values render as integers regardless of Python type, so 50.0 and
    50 are indistinguishable on the wire. Non-integral values render as plain
    decimals with no exponent and no trailing fractional zeros.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise NonCanonicalizableNumber(f"cannot canonicalize {value!r}")
        if value.is_integer() and abs(value) < 1e16:
            return str(int(value))
        dec = Decimal(repr(value))
    elif isinstance(value, Decimal):
        if not value.is_finite():
            raise NonCanonicalizableNumber(f"cannot canonicalize {value!r}")
        dec = value
    else:
        raise TypeError(f"not a number: {value!r}")
    text = format(dec, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def _render(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(_render_string(value))
    elif isinstance(value, (int, float, Decimal)):
        out.append(format_number(value))
    elif isinstance(value, dict):
        out.append("{")
        first = True
        for key in sorted(value):
            if not isinstance(key, str):
                raise MalformedDocument(f"object keys must be strings, got {key!r}")
            if not first:
                out.append(",")
            first = False
            out.append(_render_string(key))
            out.append(":")
            _render(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _render(item, out)
        out.append("]")
    else:
        raise MalformedDocument(f"value has no JSON form: {value!r}")


def canonical_json(doc: Any) -> str:
    """Canonical text for a JSON-shaped value."""
    out: list[str] = []
    _render(doc, out)
    return "".join(out)


def canonical_bytes(doc: Any) -> bytes:
    return canonical_json(doc).encode("utf-8")


def compute_hash(data: bytes) -> str:
    """sha256 over raw bytes, rendered as `sha256:<hex>`."""
    return "sha256:" + hashlib.sha256(data).hexdigest()
