"""Exact rational parsing and formatting.

Every numeric payload in this package (thresholds, leaf values, bounds,
counterexample coordinates) is a `fractions.Fraction` so that model
evaluation, constraint emission and solver-reported values compare
exactly, with no binary-float round trips anywhere in the pipeline.
"""

from __future__ import annotations

from fractions import Fraction


def to_fraction(value: str | int | Fraction) -> Fraction:
    """Parse an exact rational from decimal text ("-12.5", "1e3") or "p/q"."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise TypeError("refusing to convert a float; pass decimal text instead")
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational literal: {value!r}") from exc


def format_fraction(value: Fraction) -> str:
    """Render exactly: decimal text when the denominator is 2^a*5^b, else "p/q"."""
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    rest, twos, fives = den, 0, 0
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return f"{num}/{den}"
    shift = max(twos, fives)
    scaled = abs(num) * 10**shift // den
    digits = str(scaled).rjust(shift + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"
