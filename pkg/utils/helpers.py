"""Helper utilities for the application."""

import json
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

import sympy

from utils.config import LOG_DIGITS


def parse_fraction(value):
    """
    Read an exact rational from JSON.

    Args:
        value: an int, or a string such as "3", "1/3" or "-2/5"

    Returns:
        Fraction: the exact value

    Raises:
        ValueError: for floats, booleans and malformed strings
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(f"{value!r} is not an exact rational; write it as \"p/q\"")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"{value!r} is not a rational")


def format_fraction(value):
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def render_log(value, digits=None):
    """Decimal rendering of log(value); display only."""
    digits = LOG_DIGITS if digits is None else digits
    value = Fraction(value)
    exact = sympy.log(sympy.Rational(value.numerator, value.denominator))
    approx = Decimal(str(exact.evalf(digits + 10))).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_EVEN)
    return format(approx, "f")


def to_jsonable(obj):
    """Convert report values into plain JSON types, rationals as "p/q"."""
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(x) for x in sorted(obj, key=_sort_key)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    return obj


def _sort_key(x):
    if isinstance(x, (set, frozenset)):
        return (1, sorted(x))
    return (0, x)


def dump_json(obj):
    """Deterministic JSON text."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)
