"""Exact/float number helpers shared by the laws, the process catalog and the grammar."""

from __future__ import annotations

import math
import re
from decimal import Decimal, localcontext
from fractions import Fraction
from numbers import Rational, Real

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIO = re.compile(r"^[+-]?\d+/\d+$")


def is_exact(*xs) -> bool:
    return all(isinstance(x, Rational) for x in xs)


def div(a, b):
    """``a / b`` that stays a Fraction when both operands are rational."""
    if is_exact(a, b):
        return Fraction(a) / Fraction(b)
    return a / b


def normalize(x):
    """Collapse integral Fractions to int; leave everything else alone."""
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x.numerator)
    return x


def is_integral(x) -> bool:
    if isinstance(x, Rational):
        return Fraction(x).denominator == 1
    return float(x).is_integer()


def check_finite(name: str, x) -> None:
    if not isinstance(x, Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {x!r}")
    if not math.isfinite(float(x)):
        raise ValueError(f"{name} must be finite, got {x!r}")


def parse_number(text: str):
    """int for integer literals, exact Fraction for decimals and ``a/b``."""
    t = text.strip()
    if _RATIO.match(t):
        return normalize(Fraction(t))
    if not _NUMBER.match(t):
        raise ValueError(f"not a number: {text!r}")
    if re.fullmatch(r"[+-]?\d+", t):
        return int(t)
    return normalize(Fraction(t))


def format_number(x) -> str:
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        d = x.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d == 1:
            # terminating decimal: print exactly
            with localcontext() as ctx:
                ctx.prec = 200
                s = format(Decimal(x.numerator) / Decimal(x.denominator), "f")
            return s
        return f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def rational_gcd(values) -> Fraction:
    """Largest h > 0 with every value in h * N_0 (exact rationals only)."""
    vals = [Fraction(v) for v in values if v != 0]
    if not vals:
        raise ValueError("gcd of an all-zero collection is undefined")
    den = 1
    for v in vals:
        den = den * v.denominator // math.gcd(den, v.denominator)
    g = 0
    for v in vals:
        g = math.gcd(g, abs(int(v * den)))
    return Fraction(g, den)
