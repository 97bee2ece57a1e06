"""Shared numeric kernel.

Provides the scalar substrate everything else builds on:

* ``PrecReal``   -- an mpmath float tagged with its working precision in bits;
* ``LogMag``     -- sign + log10 magnitude, for quantities far outside float range;
* ``BernoulliCache`` -- exact rational Bernoulli numbers/polynomials, pinned to
  the integral normalization  Int_x^{x+1} B_n(t) dt = x^n  and self-checked
  symbolically on construction;
* ``theta`` family -- the Riemann-Siegel phase and its first two derivatives via
  the asymptotic series with corrections through t^-7;
* ``zeta_real``  -- Euler-Maclaurin zeta on the real axis s > 1 with a rigorous
  tail bound, switching to the Stieltjes/Laurent expansion very near s = 1;
* ``reduce_phase`` -- (theta(t) - t log n) mod 2 pi with a certified absolute
  error below 2^-50, at an explicit working precision.

All elevated-precision arithmetic goes through mpmath ``workprec`` contexts;
nothing in this module touches the global precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from mpmath import mp, mpf, workprec

from .errors import ContractError, PrecisionError

# Bits of headroom added on top of the structural bit requirement whenever we
# certify an absolute phase error.
PHASE_GUARD_BITS = 80

# Contractual absolute error ceiling for reduced phases.
PHASE_ABS_TOL = 2.0 ** -50


def phase_prec(t) -> int:
    """Default working precision (bits) for phase-critical work at height t:
    enough to resolve t * theta'(t) to well below 2^-50."""
    tf = float(t)
    if tf <= 10.0:
        raise ContractError(f"phase_prec: t must exceed 10, got {tf}")
    mag = tf * max(1.0, 0.5 * math.log(tf / (2.0 * math.pi)))
    return int(math.log2(mag)) + PHASE_GUARD_BITS


# ---------------------------------------------------------------------------
# PrecReal


@dataclass(frozen=True)
class PrecReal:
    """An arbitrary-precision real carrying its working precision in bits.

    Arithmetic between two PrecReals is performed, and the result tagged, at
    the larger of the two precisions.  The tag is a promise about how the
    value was computed, not a rounding instruction.
    """

    value: mpf
    prec: int

    def __post_init__(self):
        if self.prec < 64:
            raise ContractError(f"PrecReal precision must be >= 64 bits, got {self.prec}")

    @classmethod
    def from_decimal(cls, text: str, prec: int = 128) -> "PrecReal":
        if prec < 64:
            raise ContractError(f"PrecReal precision must be >= 64 bits, got {prec}")
        with workprec(prec):
            v = mpf(text)
        return cls(v, prec)

    @classmethod
    def from_float(cls, x: float, prec: int = 128) -> "PrecReal":
        with workprec(prec):
            v = mpf(x)
        return cls(v, prec)

    def to_decimal(self) -> str:
        # enough digits that parsing back at the same precision is <= 1 ulp
        digits = int(self.prec * 0.30103) + 3
        with workprec(self.prec):
            return mp.nstr(self.value, digits, strip_zeros=False)

    def _binop(self, other, fn):
        if isinstance(other, PrecReal):
            p = max(self.prec, other.prec)
            ov = other.value
        elif isinstance(other, (int, float, mpf)):
            p = self.prec
            ov = other
        else:
            return NotImplemented
        with workprec(p):
            return PrecReal(fn(self.value, ov), p)

    def __add__(self, other):
        return self._binop(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binop(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binop(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binop(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binop(other, lambda a, b: b / a)

    def __neg__(self):
        return PrecReal(-self.value, self.prec)

    def __abs__(self):
        return PrecReal(abs(self.value), self.prec)

    def __float__(self):
        return float(self.value)

    def _cmp_value(self, other):
        return other.value if isinstance(other, PrecReal) else other

    def __lt__(self, other):
        return self.value < self._cmp_value(other)

    def __le__(self, other):
        return self.value <= self._cmp_value(other)

    def __gt__(self, other):
        return self.value > self._cmp_value(other)

    def __ge__(self, other):
        return self.value >= self._cmp_value(other)

    def __repr__(self):
        return f"PrecReal({mp.nstr(self.value, 17)}, prec={self.prec})"


# ---------------------------------------------------------------------------
# LogMag

# Guard against exponents that cannot survive a trip through mpf exponents.
_LOGMAG_EXP_LIMIT = mpf(10) ** 9


@dataclass(frozen=True)
class LogMag:
    """sign in {-1, 0, +1} plus log10 of the magnitude (mpf; meaningless when
    sign == 0).  Multiplication adds the log10 fields exactly; addition goes
    through a sign-aware log-sum-exp.  This is the carrier for every quantity
    of the order 10^800 and beyond."""

    sign: int
    log10: mpf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ContractError(f"LogMag sign must be -1, 0 or +1, got {self.sign}")

    @classmethod
    def zero(cls) -> "LogMag":
        return cls(0, mpf(0))

    @classmethod
    def from_real(cls, x, prec: int = 128) -> "LogMag":
        if isinstance(x, PrecReal):
            prec = max(prec, x.prec)
            x = x.value
        with workprec(prec):
            x = mpf(x)
            if x == 0:
                return cls.zero()
            return cls(1 if x > 0 else -1, mp.log10(abs(x)))

    @classmethod
    def from_log10(cls, sign: int, log10_abs) -> "LogMag":
        return cls(sign, mpf(log10_abs))

    def __mul__(self, other: "LogMag") -> "LogMag":
        if not isinstance(other, LogMag):
            return NotImplemented
        if self.sign == 0 or other.sign == 0:
            return LogMag.zero()
        return LogMag(self.sign * other.sign, self.log10 + other.log10)

    def __truediv__(self, other: "LogMag") -> "LogMag":
        if not isinstance(other, LogMag):
            return NotImplemented
        if other.sign == 0:
            raise ZeroDivisionError("LogMag division by zero")
        if self.sign == 0:
            return LogMag.zero()
        return LogMag(self.sign * other.sign, self.log10 - other.log10)

    def __neg__(self) -> "LogMag":
        return LogMag(-self.sign, self.log10)

    def __abs__(self) -> "LogMag":
        return LogMag(abs(self.sign), self.log10)

    def pow_int(self, k: int) -> "LogMag":
        if self.sign == 0:
            if k <= 0:
                raise ZeroDivisionError("LogMag zero to a nonpositive power")
            return LogMag.zero()
        s = -1 if (self.sign < 0 and k % 2) else 1
        return LogMag(s, self.log10 * k)

    def __add__(self, other: "LogMag") -> "LogMag":
        if not isinstance(other, LogMag):
            return NotImplemented
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log10 >= other.log10 else (other, self)
        with workprec(200):
            d = mpf(10) ** (lo.log10 - hi.log10)  # in (0, 1]
            if hi.sign == lo.sign:
                return LogMag(hi.sign, hi.log10 + mp.log10(1 + d))
            if d == 1:
                return LogMag.zero()
            return LogMag(hi.sign, hi.log10 + mp.log10(1 - d))

    def __sub__(self, other: "LogMag") -> "LogMag":
        if not isinstance(other, LogMag):
            return NotImplemented
        return self + (-other)

    def compare_abs(self, other: "LogMag") -> int:
        """-1, 0, +1 as |self| <, ==, > |other|."""
        if self.sign == 0 or other.sign == 0:
            a = 0 if self.sign == 0 else 1
            b = 0 if other.sign == 0 else 1
            return (a > b) - (a < b)
        return (self.log10 > other.log10) - (self.log10 < other.log10)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log10 > 300:
            raise PrecisionError("LogMag magnitude overflows a float")
        return self.sign * 10.0 ** float(self.log10)

    def to_mpf(self, prec: int = 128) -> mpf:
        if self.sign == 0:
            return mpf(0)
        if abs(self.log10) > _LOGMAG_EXP_LIMIT:
            raise PrecisionError("LogMag magnitude exceeds representable exponent range")
        with workprec(prec):
            return self.sign * mp.power(10, self.log10)

    def sci(self, digits: int = 6) -> str:
        """Scientific-notation rendering like '8.55e+864'."""
        if self.sign == 0:
            return "0"
        with workprec(200):
            e = mp.floor(self.log10)
            mant = float(mp.power(10, self.log10 - e))
        # rounding can push the mantissa to 10.0
        if round(mant, digits - 1) >= 10.0:
            mant /= 10.0
            e += 1
        body = f"{mant:.{digits - 1}f}"
        return f"{'-' if self.sign < 0 else ''}{body}e{'+' if e >= 0 else '-'}{abs(int(e))}"

    def __repr__(self):
        return f"LogMag({self.sci(8)})"


def logmag_sum(items) -> LogMag:
    """Sign-aware sum of LogMags, accumulated largest-first for stability."""
    items = [x for x in items if x.sign != 0]
    if not items:
        return LogMag.zero()
    items.sort(key=lambda x: -float(x.log10))
    acc = items[0]
    for x in items[1:]:
        acc = acc + x
    return acc


# ---------------------------------------------------------------------------
# Bernoulli cache


class BernoulliCache:
    """Exact Bernoulli numbers and polynomial coefficients as Fractions.

    Normalization is pinned by the integral identity
        Int_x^{x+1} B_n(t) dt = x^n,
    equivalently B_1(0) = -1/2.  ``__init__`` verifies the identity
    symbolically for every n <= ``selftest_n`` and refuses to serve otherwise,
    so a sign-convention slip cannot propagate.
    """

    def __init__(self, max_degree: int = 200, selftest_n: int = 30):
        if max_degree < selftest_n:
            raise ContractError("BernoulliCache max_degree below self-test range")
        self.max_degree = max_degree
        self._numbers = [Fraction(1)]  # B_0
        self._coeffs: dict[int, tuple[Fraction, ...]] = {}
        self._mpf_coeffs: dict[tuple[int, int], tuple] = {}
        for n in range(1, selftest_n + 1):
            self._check_integral_identity(n)

    def number(self, n: int) -> Fraction:
        """Bernoulli number b_n (b_1 = -1/2 in this normalization)."""
        if n < 0 or n > self.max_degree:
            raise ContractError(f"Bernoulli number index {n} outside [0, {self.max_degree}]")
        while len(self._numbers) <= n:
            m = len(self._numbers)
            # sum_{j=0}^{m} C(m+1, j) b_j = 0
            s = sum(Fraction(math.comb(m + 1, j)) * self._numbers[j] for j in range(m))
            self._numbers.append(-s / (m + 1))
        return self._numbers[n]

    def poly_coeffs(self, n: int) -> tuple[Fraction, ...]:
        """Coefficients of B_n(x), highest degree first."""
        if n < 0 or n > self.max_degree:
            raise ContractError(f"Bernoulli degree {n} outside [0, {self.max_degree}]")
        if n not in self._coeffs:
            self._coeffs[n] = tuple(
                Fraction(math.comb(n, k)) * self.number(k) for k in range(n + 1)
            )
        return self._coeffs[n]

    def eval(self, n: int, x, prec: int = 128) -> mpf:
        """B_n(x) by Horner at the given working precision."""
        key = (n, prec)
        if key not in self._mpf_coeffs:
            with workprec(prec):
                self._mpf_coeffs[key] = tuple(
                    mpf(c.numerator) / c.denominator for c in self.poly_coeffs(n)
                )
        cs = self._mpf_coeffs[key]
        with workprec(prec):
            acc = mpf(0)
            for c in cs:
                acc = acc * x + c
            return acc

    def eval_exact(self, n: int, x: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in self.poly_coeffs(n):
            acc = acc * x + c
        return acc

    def _check_integral_identity(self, n: int):
        # Int_x^{x+1} B_n = A(x+1) - A(x) with A the exact antiderivative;
        # the difference must equal x^n coefficient by coefficient.
        cs = self.poly_coeffs(n)
        anti = [c / (n + 1 - k) for k, c in enumerate(cs)] + [Fraction(0)]
        # A(x+1): expand each (x+1)^(n+1-k) term
        diff = [Fraction(0)] * (n + 2)
        for k, c in enumerate(anti):
            d = n + 1 - k
            for j in range(d + 1):
                diff[n + 1 - j] += c * math.comb(d, j)
            diff[n + 1 - d] -= c
        expect = [Fraction(0)] * (n + 2)
        expect[1] = Fraction(1)  # x^n has index n+1-n = 1
        if diff != expect:
            raise AssertionError(f"Bernoulli integral identity failed at n={n}")


BERNOULLI = BernoulliCache()


def frac(x) -> mpf:
    """Fractional part {x} in [0, 1) (mpf floor is exact)."""
    x = mpf(x) if not isinstance(x, mpf) else x
    return x - mp.floor(x)


# ---------------------------------------------------------------------------
# Riemann-Siegel theta asymptotics

# Correction terms c_m / t^(2m-1); first omitted term is ~0.000417/t^9.
_THETA_CORR = (
    (Fraction(1, 48), 1),
    (Fraction(7, 5760), 3),
    (Fraction(31, 80640), 5),
    (Fraction(127, 430080), 7),
)
_THETA_TRUNC_COEFF = 511.0 * 5 / (512 * 66 * 180)  # next term's coefficient


def _require_theta_domain(t: float):
    if t < 10.0:
        raise ContractError(f"theta asymptotics require t >= 10, got {t}")


def theta(t, prec: int | None = None) -> mpf:
    """Riemann-Siegel theta(t) from the asymptotic series.

    Truncation error is about 4.2e-4 / t^9 absolute, i.e. negligible for every
    supported pipeline height (t >= 1e3 gives < 1e-30).
    """
    _require_theta_domain(float(t))
    if prec is None:
        prec = phase_prec(t)
    with workprec(prec):
        t = mpf(t)
        th = t / 2 * mp.log(t / (2 * mp.pi)) - t / 2 - mp.pi / 8
        for c, p in _THETA_CORR:
            th += mpf(c.numerator) / c.denominator / t**p
        return th


def theta_trunc_bound(t) -> float:
    """Absolute bound on the theta() truncation error at height t."""
    return _THETA_TRUNC_COEFF / float(t) ** 9


def theta_prime(t, prec: int = 128) -> mpf:
    """theta'(t) = (1/2) log(t / 2 pi) plus differentiated corrections."""
    _require_theta_domain(float(t))
    with workprec(prec):
        t = mpf(t)
        d = mp.log(t / (2 * mp.pi)) / 2
        for c, p in _THETA_CORR:
            d -= p * mpf(c.numerator) / c.denominator / t ** (p + 1)
        return d


def theta_second(t, prec: int = 128) -> mpf:
    """theta''(t) = 1/(2t) plus differentiated corrections."""
    _require_theta_domain(float(t))
    with workprec(prec):
        t = mpf(t)
        d = 1 / (2 * t)
        for c, p in _THETA_CORR:
            d += p * (p + 1) * mpf(c.numerator) / c.denominator / t ** (p + 2)
        return d


def theta_prime_from_log(log_t, prec: int = 128) -> mpf:
    """theta'(T) for heights given only through log T (symbolic T such as
    10^20000); the 1/t^2 corrections are far below working precision there."""
    with workprec(prec):
        return (mpf(log_t) - mp.log(2 * mp.pi)) / 2


# ---------------------------------------------------------------------------
# Real zeta

_LAURENT_WINDOW = 1e-3
_LAURENT_TERMS = 12


@lru_cache(maxsize=None)
def _stieltjes(k: int) -> mpf:
    with workprec(300):
        return +mp.stieltjes(k)


def zeta_real(s, prec: int = 128, rel_tol: float = 1e-20) -> mpf:
    """zeta(s) for real s > 1.

    Euler-Maclaurin with the classical rigorous remainder bound
    |R_m| <= |(s + 2m + 1) / (s + 2m + 1 - 1)| * |first omitted term|
    (monotone-ratio form), with N grown until the bound clears rel_tol.
    For 0 < s - 1 < 1e-3 the sum is replaced by the Stieltjes expansion
    zeta(s) = 1/(s-1) + sum_k (-1)^k gamma_k (s-1)^k / k!, whose truncation
    error at 12 terms is below 1e-40 in that window.
    """
    sf = float(s)
    if not sf > 1.0:
        raise ContractError(f"zeta_real requires s > 1, got {sf}")
    wp = prec + 30
    with workprec(wp):
        s = mpf(s)
        if s - 1 < _LAURENT_WINDOW:
            acc = 1 / (s - 1)
            d = s - 1
            for k in range(_LAURENT_TERMS):
                acc += (-1) ** k * _stieltjes(k) * d**k / mp.factorial(k)
            return +acc
        m = 12
        N = 16
        while True:
            # partial sum over n < N plus integral and boundary terms
            acc = mpf(0)
            for n in range(1, N):
                acc += mpf(n) ** (-s)
            acc += mpf(N) ** (1 - s) / (s - 1)
            acc += mpf(N) ** (-s) / 2
            # correction terms B_2k / (2k)! * s(s+1)...(s+2k-2) * N^(-s-2k+1)
            rising = s
            term = mpf(0)
            for k in range(1, m + 1):
                b = BERNOULLI.number(2 * k)
                term = (
                    mpf(b.numerator)
                    / b.denominator
                    / mp.factorial(2 * k)
                    * rising
                    * mpf(N) ** (-s - 2 * k + 1)
                )
                acc += term
                rising *= (s + 2 * k - 1) * (s + 2 * k)
            # first omitted term bounds the remainder up to the standard factor
            b = BERNOULLI.number(2 * m + 2)
            omitted = (
                abs(mpf(b.numerator))
                / b.denominator
                / mp.factorial(2 * m + 2)
                * rising
                * mpf(N) ** (-s - 2 * m - 1)
            )
            bound = abs(omitted) * (s + 2 * m + 1) / (s + 2 * m)
            if bound < rel_tol * abs(acc):
                return +acc
            N *= 2
            if N > 1 << 22:
                raise PrecisionError("zeta_real: tail bound will not converge")


# ---------------------------------------------------------------------------
# Phase reduction


def reduce_phase(t, n: int, prec: int | None = None) -> mpf:
    """(theta(t) - t log n) mod 2 pi, in [0, 2 pi), certified to 2^-50 absolute.

    ``prec`` defaults to phase_prec(t); passing something too small for the
    magnitudes involved raises PrecisionError rather than degrading silently.
    """
    if n < 1:
        raise ContractError(f"reduce_phase needs n >= 1, got {n}")
    tf = float(t)
    _require_theta_domain(tf)
    if prec is None:
        prec = phase_prec(t)
    # bits consumed by the integer part of the largest intermediate
    mag = max(tf * max(1.0, math.log(max(n, 2))), tf, 1.0)
    need = int(math.log2(mag)) + 1 + 50
    if prec < need + 10:
        raise PrecisionError(
            f"reduce_phase at t={tf:.3e}, n={n} needs >= {need + 10} bits, got {prec}"
        )
    if theta_trunc_bound(t) > PHASE_ABS_TOL / 4:
        raise PrecisionError(f"theta truncation too coarse for phase work at t={tf}")
    with workprec(prec):
        t = mpf(t)
        val = theta(t, prec) - t * mp.log(n)
        r = mp.fmod(val, 2 * mp.pi)
        if r < 0:
            r += 2 * mp.pi
        return +r
