"""Numeric conventions used throughout the package.

Probabilities that can be kept as exact rationals are kept as
``fractions.Fraction`` and compared exactly.  Quantities that live in the
log domain (entropies, deficiencies, thresholds of the form a*Delta*|S|+b)
are floats and every inequality against them is cushioned by ``TOL``:
a strict "lhs > thr" becomes "lhs > thr + TOL" and a non-strict
"lhs <= thr" becomes "lhs <= thr + TOL", so that ties are decided the same
way on every platform.
"""

from __future__ import annotations

import math
from fractions import Fraction

TOL = 1e-9


def log2_fraction(p: Fraction) -> float:
    """log2 of a positive rational, computed from the integer parts.

    Splitting into two integer logs keeps full precision even when the
    numerator or denominator would overflow a float.
    """
    if p <= 0:
        raise ValueError("log2 of a non-positive rational")
    return math.log2(p.numerator) - math.log2(p.denominator)


def gt(lhs: float, rhs: float) -> bool:
    """Strict ``lhs > rhs`` with the tolerance cushion."""
    return lhs > rhs + TOL


def le(lhs: float, rhs: float) -> bool:
    """Non-strict ``lhs <= rhs`` with the tolerance cushion."""
    return lhs <= rhs + TOL


def fmt_float(x: float) -> str:
    """Stable float rendering for reports (%.12g)."""
    return "%.12g" % x


def fmt_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"
