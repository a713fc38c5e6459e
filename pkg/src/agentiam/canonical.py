"""Deterministic canonical serialization.

Every signature and hash in this package is computed over the byte string
produced here, so two structurally equal documents must serialize to the
same bytes on any host.  The encoding is a JSON subset: object keys sorted
by code point, no insignificant whitespace, UTF-8 output, and no floats.
Amounts are carried as integer minor units instead of decimals.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping

from .errors import UnsupportedValueError

__all__ = ["canonical_bytes", "canonical_loads", "to_hex", "from_hex"]

# Printable-range control characters that JSON requires escaped by name.
_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\b": "\\b",
    "\f": "\\f",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


def _encode_string(value: str, out: list[str]) -> None:
    out.append('"')
    for ch in value:
        esc = _ESCAPES.get(ch)
        if esc is not None:
            out.append(esc)
        elif ch < "\x20":
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')


def _encode(value: Any, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        raise UnsupportedValueError(
            "floats are outside the canonical domain; use integer minor units"
        )
    elif isinstance(value, str):
        _encode_string(value, out)
    elif isinstance(value, Mapping):
        out.append("{")
        first = True
        for key in sorted(value.keys()):
            if not isinstance(key, str):
                raise UnsupportedValueError(f"non-string map key: {key!r}")
            if not first:
                out.append(",")
            first = False
            _encode_string(key, out)
            out.append(":")
            _encode(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise UnsupportedValueError(
            f"value of type {type(value).__name__} is outside the canonical domain"
        )


def canonical_bytes(value: Any) -> bytes:
    """Serialize ``value`` to its unique canonical byte string.

    Accepts None, bool, int, str, sequences, and string-keyed mappings.
    Anything else (floats in particular) raises ``UnsupportedValueError``.
    """
    out: list[str] = []
    _encode(value, out)
    return "".join(out).encode("utf-8")


def _reject_float(text: str) -> Any:
    raise UnsupportedValueError(f"float literal {text!r} is outside the canonical domain")


def canonical_loads(data: bytes | str) -> Any:
    """Parse a canonical document back into plain values.

    The encoding is a JSON subset, so any JSON parser reads it; this one
    additionally rejects float literals to keep round-trips inside the
    canonical domain.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data, parse_float=_reject_float)
    except json.JSONDecodeError as exc:
        raise UnsupportedValueError(f"malformed canonical document: {exc}") from exc


def to_hex(data: bytes) -> str:
    """Lowercase hex, the wire encoding for every digest and key field."""
    return data.hex()


def from_hex(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise UnsupportedValueError(f"invalid hex field: {text!r}") from exc


def sorted_unique(items: Iterable[str]) -> tuple[str, ...]:
    """Normalize an unordered string collection for canonical storage."""
    return tuple(sorted(set(items)))
