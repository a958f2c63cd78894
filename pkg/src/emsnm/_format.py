"""Deterministic text rendering for exact and float quantities."""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction


def fmt_number(value) -> str:
    """Render ints and Fractions exactly, floats by repr.

    A Fraction whose denominator has only factors 2 and 5 prints as a
    terminating decimal; any other Fraction prints as ``n/d``.
    """
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        d = value.denominator
        for p in (2, 5):
            while d % p == 0:
                d //= p
        if d == 1:
            text = format(Decimal(value.numerator) / Decimal(value.denominator), "f")
            return text.rstrip("0").rstrip(".") if "." in text else text
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)
