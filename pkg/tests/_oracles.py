"""Independent exact-arithmetic oracles for the test suite.

Everything here works in exact rational arithmetic (fractions.Fraction)
and rounds manually, sharing no code or failure modes with the package's
numpy/numba floating-point paths.
"""

from __future__ import annotations

import math
from fractions import Fraction

FP32_MIN_NORMAL_EXP = -126
FP32_QUANTUM_EXP = -149  # subnormal spacing 2**-149
FP32_MAX_EXP = 128


def rz32(x: Fraction) -> float:
    """Round an exact rational toward zero to FP32, returned as a float."""
    if x == 0:
        return 0.0
    sign = -1.0 if x < 0 else 1.0
    m = -x if x < 0 else x
    e = m.numerator.bit_length() - m.denominator.bit_length()
    if Fraction(2) ** e > m:
        e -= 1
    assert Fraction(2) ** e <= m < Fraction(2) ** (e + 1)
    q = FP32_QUANTUM_EXP if e < FP32_MIN_NORMAL_EXP else e - 23
    units = m / Fraction(2) ** q
    trunc = units.numerator // units.denominator  # floor == toward zero (m > 0)
    value = Fraction(trunc) * Fraction(2) ** q
    if value >= Fraction(2) ** FP32_MAX_EXP:
        return sign * math.inf
    # trunc < 2**24 and the scale is a power of two, so this is exact.
    return sign * trunc * 2.0 ** q


def rz_add(a: float, b: float) -> float:
    """Round-toward-zero FP32 sum of two exactly-representable FP32 values."""
    return rz32(Fraction(a) + Fraction(b))


def rz_dot(ps, qs, start: float = 0.0) -> float:
    """Sequential ascending-k RZ accumulation of exact products."""
    acc = Fraction(start)
    for p, q in zip(ps, qs, strict=True):
        term = Fraction(p) * Fraction(q)  # exact product of FP16-precision values
        acc = Fraction(rz32(acc + term))
    return float(acc)


def rz_norm(vals) -> float:
    """Sequential RZ sum of squares, ascending k."""
    return rz_dot(vals, vals)
