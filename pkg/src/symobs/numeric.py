"""Exact number handling shared by every module.

Gauges and continuous coordinates are :class:`fractions.Fraction` values so
that grid rounding and relation membership are bit-exact.  ``math.inf`` marks
an unrelated tuple; it compares correctly against fractions.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from typing import Any

INF = math.inf


def to_fraction(value: Any) -> Fraction:
    """Convert ints, strings, decimals and floats to an exact fraction.

    Floats go through ``repr`` so that ``0.032`` becomes ``32/1000`` rather
    than its binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot convert {value!r} to a fraction")
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"unsupported numeric type {type(value).__name__}")


def to_gauge(value: Any):
    """Like :func:`to_fraction` but lets infinity through."""
    if value is None:
        return INF
    if isinstance(value, float) and math.isinf(value):
        if value < 0:
            raise ValueError("gauges are nonnegative")
        return INF
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return INF
    return to_fraction(value)


def round_half_away(value: Fraction, quantum: Fraction = Fraction(1)) -> Fraction:
    """Round ``value`` to the nearest multiple of ``quantum``; ties go away from zero."""
    q = value / quantum
    k = math.floor(abs(q) + Fraction(1, 2))
    return (k if q >= 0 else -k) * quantum


def rd_int(value: Fraction) -> int:
    return int(round_half_away(value))


def fmt_num(value) -> str:
    """Render a number as a plain decimal string when it terminates."""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, int):
        return str(value)
    frac = to_fraction(value)
    den = frac.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{frac.numerator}/{frac.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(frac.numerator)
    scaled = frac * 10**digits
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def json_num(value):
    """JSON-friendly rendering: exact strings for fractions, ``"inf"`` for infinity."""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    return fmt_num(value)


def sort_key(obj: Any):
    """Total order over the state and input identifiers used in this package.

    Frozensets (lifted states) are ordered by size and then by their sorted
    members, tuples elementwise, and scalars by a type tag first so that mixed
    identifiers still compare.
    """
    if isinstance(obj, (frozenset, set)):
        members = sorted((sort_key(m) for m in obj))
        return (3, len(members), tuple(members))
    if isinstance(obj, tuple):
        return (2, tuple(sort_key(m) for m in obj))
    if isinstance(obj, bool):
        return (0, int(obj))
    if isinstance(obj, (int, Fraction, float, Decimal)):
        return (0, obj)
    if isinstance(obj, str):
        return (1, obj)
    key = getattr(obj, "sort_key", None)
    if callable(key):
        return (4, key())
    return (5, repr(obj))


def sorted_states(items) -> list:
    return sorted(items, key=sort_key)
