"""Vectorized double-double (~106-bit) arithmetic on numpy float64 pairs.

The main derivative sum needs t * log n reduced mod 2 pi with ~50 fractional
bits intact while t * log n itself is ~2^54, which is exactly one float64 short.
Representing every phase quantity as an (hi, lo) pair with |lo| <= ulp(hi)/2
gives ~106 bits and keeps the whole per-term pipeline in numpy.

Algorithms are the classical error-free transforms (Knuth two-sum, Dekker
split product); no FMA is assumed.
"""

from __future__ import annotations

import numpy as np

_SPLIT = 134217729.0  # 2^27 + 1

# 2 pi to ~107 bits
TWOPI_HI = 6.283185307179586
TWOPI_LO = 2.4492935982947064e-16


def two_sum(a, b):
    """Error-free a + b -> (fl(a+b), roundoff)."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    """two_sum assuming |a| >= |b|."""
    s = a + b
    return s, b - (s - a)


def two_prod(a, b):
    """Error-free a * b -> (fl(a*b), roundoff) via Dekker splitting."""
    p = a * b
    aa = _SPLIT * a
    ahi = aa - (aa - a)
    alo = a - ahi
    bb = _SPLIT * b
    bhi = bb - (bb - b)
    blo = b - bhi
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def dd_add(ahi, alo, bhi, blo):
    s, e = two_sum(ahi, bhi)
    e = e + alo + blo
    return quick_two_sum(s, e)


def dd_sub(ahi, alo, bhi, blo):
    return dd_add(ahi, alo, -bhi, -blo)


def dd_mul(ahi, alo, bhi, blo):
    p, e = two_prod(ahi, bhi)
    e = e + (ahi * blo + alo * bhi)
    return quick_two_sum(p, e)


def dd_mul_scalar(ahi, alo, b):
    p, e = two_prod(ahi, b)
    e = e + alo * b
    return quick_two_sum(p, e)


def dd_from_mpf(x):
    """Round an mpmath value to an (hi, lo) pair."""
    hi = float(x)
    lo = float(x - hi)
    return hi, lo


def dd_reduce_twopi(hi, lo):
    """Subtract the nearest multiple of 2 pi, elementwise; result in
    roughly [-pi, pi] with the full pair error budget preserved.  Valid for
    |hi| up to ~2^40 (multiplier stays exactly representable)."""
    m = np.round(hi / TWOPI_HI)
    ph, pe = two_prod(m, TWOPI_HI)
    pe = pe + m * TWOPI_LO
    return dd_add(hi, lo, -ph, -pe)
