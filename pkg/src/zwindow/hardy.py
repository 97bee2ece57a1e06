"""Hardy Z and its derivatives by the truncated main sum, plus window tools.

The k-th derivative is evaluated as

    2 * sum_{1 <= n <= sqrt(t/2pi)} n^{-1/2} (theta'(t) - log n)^k
        * cos(theta(t) - t log n + k pi/2),

with the asymptotically negligible error term dropped.  Accuracy is
documented for t >= 1e3; evaluation is allowed down to t = 50 for
calibration work, with degraded absolute error (observed ~0.5 at t = 100).

The expensive part is the phase theta(t) - t log n mod 2pi across ~1e7
values of n.  A per-anchor table holds log n and (T0 log n mod 2pi) in
double-double (~106-bit) form; each evaluation then needs only vectorized
double-double updates with delta = t - T0, followed by float64 cosines.
Table construction gets exact prime data from mpmath and composes
composites multiplicatively over a smallest-prime-factor sieve.

Also here: zero location, boundary/peak searches that assemble a Window,
the even-derivative tail bound, the running minimum of partial sums, and
the plain-text ingestion formats for externally computed zero offsets and
(t - T, Z(t)) samples.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from mpmath import mp, mpf, workprec

from . import dd128
from .errors import ContractError, IngestError, PrecisionError, WindowRejection
from .numkernel import (
    PrecReal,
    phase_prec,
    theta,
    theta_prime,
    zeta_real,
)
from .psi import NodeSet

log = logging.getLogger(__name__)

# Documented-accuracy floor and the hard evaluation floor for the main sum.
ACCURACY_FLOOR_T = 1.0e3
HARD_FLOOR_T = 50.0

_CHUNK = 1 << 20
_BLOCK = 4096


def _split(x) -> tuple:
    """mpf -> double-double (hi, lo)."""
    hi = float(x)
    return hi, float(x - hi)


def _abs_t(base, off, prec: int) -> PrecReal:
    """base + off as a PrecReal, added at full precision (the ambient mpmath
    context would otherwise round the sum to its own precision)."""
    with workprec(prec):
        return PrecReal(base + mpf(off), prec)


def truncation_count(t) -> int:
    """Number of terms sqrt(t / 2pi), floored, at high precision."""
    with workprec(80):
        return int(mp.floor(mp.sqrt(mpf(t) / (2 * mp.pi))))


# ---------------------------------------------------------------------------
# Phase table


class PhaseTable:
    """Immutable per-anchor table: for 1 <= n <= n_max, double-double
    log n and rho_n = T0 log n mod 2pi, plus n^{-1/2} in float64.

    Primes get exact mpmath values; composites are composed in dependency
    rounds as rho_n = rho_spf + rho_cofactor (mod 2pi), which keeps the
    whole build a few seconds even at n_max ~ 1e7.
    """

    def __init__(self, t0, n_max: int, prec: Optional[int] = None):
        if n_max < 1:
            raise ContractError(f"PhaseTable needs n_max >= 1, got {n_max}")
        if prec is None:
            prec = (
                int(math.log2(max(float(t0), 4.0) * math.log(max(n_max, 4)))) + 130
            )
        self.t0 = +mpf(t0)
        self.n_max = int(n_max)
        self.prec = prec
        self._build()

    def _build(self):
        n = self.n_max
        idx = np.arange(n + 1, dtype=np.int64)
        spf = np.zeros(n + 1, np.int32)
        for p in range(2, int(n**0.5) + 1):
            if spf[p] == 0:
                sl = spf[p * p :: p]
                sl[sl == 0] = p
        prime_mask = (spf == 0) & (idx >= 2)
        spf[prime_mask] = idx[prime_mask].astype(np.int32)
        primes = idx[prime_mask]
        cof = np.zeros(n + 1, np.int64)
        if n >= 2:
            cof[2:] = idx[2:] // spf[2:]

        log_hi = np.zeros(n + 1)
        log_lo = np.zeros(n + 1)
        rho_hi = np.zeros(n + 1)
        rho_lo = np.zeros(n + 1)
        with workprec(self.prec):
            t0m = +self.t0
            twopi = 2 * mp.pi
            lh = np.empty(len(primes))
            ll = np.empty(len(primes))
            rh = np.empty(len(primes))
            rl = np.empty(len(primes))
            for i, p in enumerate(primes.tolist()):
                lp = mp.log(p)
                r = mp.fmod(t0m * lp, twopi)
                h = float(lp)
                lh[i] = h
                ll[i] = float(lp - h)
                h = float(r)
                rh[i] = h
                rl[i] = float(r - h)
        log_hi[primes] = lh
        log_lo[primes] = ll
        rho_hi[primes] = rh
        rho_lo[primes] = rl

        done = np.zeros(n + 1, bool)
        done[: min(2, n + 1)] = True
        done[primes] = True
        while not done.all():
            ready = ~done & done[cof]
            w = np.where(ready)[0]
            if len(w) == 0:
                raise PrecisionError("phase table composition stalled")
            s = spf[w].astype(np.int64)
            c = cof[w]
            log_hi[w], log_lo[w] = dd128.dd_add(
                log_hi[s], log_lo[s], log_hi[c], log_lo[c]
            )
            h, lo_ = dd128.dd_add(rho_hi[s], rho_lo[s], rho_hi[c], rho_lo[c])
            over = h >= dd128.TWOPI_HI
            h2, l2 = dd128.dd_add(h, lo_, -dd128.TWOPI_HI, -dd128.TWOPI_LO)
            rho_hi[w] = np.where(over, h2, h)
            rho_lo[w] = np.where(over, l2, lo_)
            done[w] = True

        rsqrt = np.zeros(n + 1)
        if n >= 1:
            rsqrt[1:] = 1.0 / np.sqrt(idx[1:].astype(np.float64))
        self.log_hi = log_hi
        self.log_lo = log_lo
        self.rho_hi = rho_hi
        self.rho_lo = rho_lo
        self.rsqrt = rsqrt


# ---------------------------------------------------------------------------
# Evaluation config


@dataclass
class ZEvalConfig:
    """Evaluation context anchored at height t (the phase-table anchor).

    max_k defaults to floor((c_param / 2) theta'(t)), the largest derivative
    order the truncated-sum statement covers; c_param must be >= e.  span is
    how far (in t) evaluations may wander from the anchor before the table
    is considered stale; the table covers term counts up to t + span.
    """

    t: PrecReal
    max_k: Optional[int] = None
    c_param: float = math.e
    chunk: int = _CHUNK
    workers: int = 1
    span: float = 4.0
    _table: Optional[PhaseTable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        tf = float(self.t)
        if tf < HARD_FLOOR_T:
            raise ContractError(f"ZEvalConfig anchor t = {tf} below hard floor {HARD_FLOOR_T}")
        if self.c_param < math.e:
            raise ContractError(f"c_param must be >= e, got {self.c_param}")
        kcap = float(self.c_param / 2 * theta_prime(self.t.value))
        if self.max_k is None:
            self.max_k = int(kcap)
        elif self.max_k > kcap:
            raise ContractError(
                f"max_k = {self.max_k} exceeds (c/2) theta'(t) = {kcap:.2f}"
            )
        if self.chunk < _BLOCK:
            raise ContractError(f"chunk must be >= {_BLOCK}")
        if self.workers < 1:
            raise ContractError("workers must be >= 1")

    def table(self) -> PhaseTable:
        if self._table is None:
            with workprec(max(self.t.prec, 120)):
                padded = self.t.value + mpf(self.span)
            self._table = PhaseTable(self.t.value, max(truncation_count(padded), 1))
        return self._table


# ---------------------------------------------------------------------------
# The main sum


def _partial_sum(table: PhaseTable, lo: int, hi: int, dh, dl, trh, trl, thp, k: int):
    """Compensated partial sum of the k-th derivative terms for lo <= n < hi."""
    lh = table.log_hi[lo:hi]
    ll = table.log_lo[lo:hi]
    rh = table.rho_hi[lo:hi]
    rl = table.rho_lo[lo:hi]
    m = hi - lo
    mh, ml = dd128.dd_mul(np.full(m, dh), np.full(m, dl), lh, ll)
    ph, pl = dd128.dd_add(rh, rl, mh, ml)
    ph, pl = dd128.dd_sub(np.full(m, trh), np.full(m, trl), ph, pl)
    mult = np.round(ph / dd128.TWOPI_HI)
    sh, sl = dd128.two_prod(mult, dd128.TWOPI_HI)
    sl = sl + mult * dd128.TWOPI_LO
    ph, pl = dd128.dd_add(ph, pl, -sh, -sl)
    phase = ph + pl
    km = k % 4
    if km == 0:
        tr = np.cos(phase)
    elif km == 1:
        tr = -np.sin(phase)
    elif km == 2:
        tr = -np.cos(phase)
    else:
        tr = np.sin(phase)
    amp = table.rsqrt[lo:hi]
    if k > 0:
        amp = amp * (thp - lh) ** k
    terms = amp * tr
    nblk = (m + _BLOCK - 1) // _BLOCK
    pad = np.zeros(nblk * _BLOCK)
    pad[:m] = terms
    return math.fsum(pad.reshape(nblk, _BLOCK).sum(axis=1).tolist())


def _phase_inputs(table: PhaseTable, t):
    """Split theta(t) mod 2pi and delta = t - T0 into double-doubles."""
    prec = max(phase_prec(t), 120)
    with workprec(prec):
        tm = mpf(t)
        thr = mp.fmod(theta(tm, prec), 2 * mp.pi)
        if thr < 0:
            thr += 2 * mp.pi
        delta = tm - table.t0
        if abs(delta) > 1.0e5:
            raise ContractError(
                f"evaluation point {float(tm)} too far from table anchor "
                f"{float(table.t0)}; rebuild the table near the target"
            )
        trh, trl = _split(thr)
        dh, dl = _split(delta)
        thp = float(theta_prime(tm, prec))
    return trh, trl, dh, dl, thp


def z_deriv(t: PrecReal, k: int, cfg: ZEvalConfig) -> PrecReal:
    """Z^(k)(t) by the truncated main sum (error term dropped).

    Deterministic under parallelism: the sum is split into fixed chunks
    regardless of worker count, each chunk reduced by blocked compensated
    summation, and chunk results combined in index order.
    """
    tv = t.value if isinstance(t, PrecReal) else mpf(t)
    tf = float(tv)
    if tf < HARD_FLOOR_T:
        raise ContractError(f"z_deriv requires t >= {HARD_FLOOR_T}, got {tf}")
    if k < 0 or k > cfg.max_k:
        raise ContractError(f"derivative order k = {k} outside [0, {cfg.max_k}]")
    kcap = float(cfg.c_param / 2 * theta_prime(tv))
    if k > kcap:
        raise ContractError(f"k = {k} exceeds (c/2) theta'(t) = {kcap:.2f}")
    table = cfg.table()
    nt = truncation_count(tv)
    if nt > table.n_max:
        raise ContractError(
            f"term count {nt} exceeds table size {table.n_max}; "
            "anchor the config closer to the target height"
        )
    trh, trl, dh, dl, thp = _phase_inputs(table, tv)
    starts = list(range(1, nt + 1, cfg.chunk))
    if not starts:
        return PrecReal.from_float(0.0, 64)

    def _one(lo: int) -> float:
        return _partial_sum(
            table, lo, min(lo + cfg.chunk, nt + 1), dh, dl, trh, trl, thp, k
        )

    if cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            partials = list(ex.map(_one, starts))
    else:
        partials = [_one(lo) for lo in starts]
    return PrecReal.from_float(2.0 * math.fsum(partials), 64)


def partial_sum_min(t: PrecReal, cfg: ZEvalConfig) -> PrecReal:
    """min over 1 <= m <= sqrt(t/2pi) of sum_{n<=m} s_n(t), where
    s_n(t) = -(2/sqrt n)(theta'(t) - log n) sin(theta(t) - t log n),
    streamed in one pass."""
    tv = t.value if isinstance(t, PrecReal) else mpf(t)
    if float(tv) < ACCURACY_FLOOR_T:
        raise ContractError(f"partial_sum_min requires t >= {ACCURACY_FLOOR_T}")
    table = cfg.table()
    nt = truncation_count(tv)
    if nt > table.n_max:
        raise ContractError("term count exceeds table size")
    trh, trl, dh, dl, thp = _phase_inputs(table, tv)
    running = 0.0
    best = math.inf
    for lo in range(1, nt + 1, cfg.chunk):
        hi = min(lo + cfg.chunk, nt + 1)
        lh = table.log_hi[lo:hi]
        ll = table.log_lo[lo:hi]
        rh = table.rho_hi[lo:hi]
        rl = table.rho_lo[lo:hi]
        m = hi - lo
        mh, ml = dd128.dd_mul(np.full(m, dh), np.full(m, dl), lh, ll)
        ph, pl = dd128.dd_add(rh, rl, mh, ml)
        ph, pl = dd128.dd_sub(np.full(m, trh), np.full(m, trl), ph, pl)
        mult = np.round(ph / dd128.TWOPI_HI)
        sh, sl = dd128.two_prod(mult, dd128.TWOPI_HI)
        sl = sl + mult * dd128.TWOPI_LO
        ph, pl = dd128.dd_add(ph, pl, -sh, -sl)
        phase = ph + pl
        terms = -2.0 * table.rsqrt[lo:hi] * (thp - lh) * np.sin(phase)
        prefix = np.cumsum(terms)
        best = min(best, running + float(prefix.min()))
        running += math.fsum(terms.tolist())
    return PrecReal.from_float(best, 64)


# ---------------------------------------------------------------------------
# Windows


@dataclass(frozen=True)
class Window:
    """A closed observation window [T - a, T + a] holding all n+1 interior
    zeros (n odd), with edge diagnostics and the nearby peak when known."""

    T: PrecReal
    a: PrecReal
    zeros: tuple
    zprime_max_at_edges: tuple = (False, False)
    t_peak: Optional[PrecReal] = None
    z_peak: Optional[PrecReal] = None

    def __post_init__(self):
        if not self.a.value > 0:
            raise ContractError("window half-width must be positive")
        zs = tuple(self.zeros)
        if len(zs) < 2 or len(zs) % 2 != 0:
            raise ContractError(
                f"window must contain an even count of zeros (odd n), got {len(zs)}"
            )
        lo = self.T.value - self.a.value
        hi = self.T.value + self.a.value
        prev = None
        for z in zs:
            if not (lo < z.value < hi):
                raise ContractError("zero outside the open window")
            if prev is not None and z.value < prev:
                raise ContractError("zeros must be non-decreasing")
            prev = z.value
        object.__setattr__(self, "zeros", zs)

    @property
    def n(self) -> int:
        return len(self.zeros) - 1

    def offsets(self) -> tuple:
        """x_k = gamma_k - T as PrecReals."""
        return tuple(z - self.T for z in self.zeros)

    def node_set(self) -> NodeSet:
        return NodeSet(self.a, self.offsets())


def expected_zero_count(T, a) -> float:
    """Mean-count increment (theta(T+a) - theta(T-a)) / pi across the window."""
    with workprec(max(phase_prec(T), 120)):
        Tm = mpf(T)
        am = mpf(a)
        return float((theta(Tm + am) - theta(Tm - am)) / mp.pi)


def find_zeros(
    T: PrecReal,
    a: PrecReal,
    cfg: ZEvalConfig,
    eval_fn: Optional[Callable] = None,
    require_odd: bool = False,
    refine_tol: float = 1.0e-10,
) -> tuple:
    """All sign-change zeros of Z in (T - a, T + a), each refined to
    |error| <= refine_tol, as absolute ordinates (PrecReal).

    eval_fn(offset, k) may replace the Z evaluator (offsets relative to T);
    require_odd turns an even count into a WindowRejection instead of a
    normal return.  a = 0 returns the empty tuple.
    """
    av = float(a.value if isinstance(a, PrecReal) else a)
    if av < 0:
        raise ContractError("window half-width must be nonnegative")
    if av == 0:
        return ()
    Tv = T.value if isinstance(T, PrecReal) else mpf(T)
    prec = max(phase_prec(Tv), 120)
    if eval_fn is None:
        def eval_fn(off: float, k: int) -> float:
            return float(z_deriv(_abs_t(Tv, off, prec), k, cfg))

    gap = math.pi / float(theta_prime(Tv))
    step = gap / 8.0
    m = max(int(math.ceil(2 * av / step)), 8)
    offs = np.linspace(-av, av, m + 1)
    vals = np.array([eval_fn(float(o), 0) for o in offs])

    zeros_off = []
    for i in range(m):
        f0, f1 = vals[i], vals[i + 1]
        if f0 == 0.0:
            if offs[i] > -av:
                zeros_off.append(float(offs[i]))
            continue
        if f0 * f1 < 0:
            zeros_off.append(
                _refine_zero(eval_fn, float(offs[i]), float(offs[i + 1]), f0, f1, refine_tol)
            )
    if vals[-1] == 0.0 and offs[-1] < av:
        zeros_off.append(float(offs[-1]))

    mean = expected_zero_count(Tv, av)
    log.info(
        "find_zeros: %d zeros in window, mean-count increment %.3f",
        len(zeros_off), mean,
    )
    if require_odd and len(zeros_off) % 2 != 0:
        raise WindowRejection(
            f"window holds {len(zeros_off)} zeros (even n); odd n required"
        )
    return tuple(_abs_t(Tv, o, prec) for o in sorted(zeros_off))


def _refine_zero(eval_fn, lo, hi, flo, fhi, tol) -> float:
    """Bracketed Newton refinement with bisection safeguarding."""
    for _ in range(2):
        mid = 0.5 * (lo + hi)
        fm = eval_fn(mid, 0)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    x = 0.5 * (lo + hi)
    fx = eval_fn(x, 0)
    for _ in range(60):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        d = eval_fn(x, 1)
        if d != 0.0:
            xn = x - fx / d
        else:
            xn = 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        fn_ = eval_fn(xn, 0)
        if fn_ == 0.0:
            return xn
        if flo * fn_ < 0:
            hi, fhi = xn, fn_
        else:
            lo, flo = xn, fn_
        if abs(xn - x) <= tol and hi - lo <= 4 * tol:
            return xn
        x, fx = xn, fn_
    raise PrecisionError(f"zero refinement stalled in [{lo}, {hi}]")


def _polish_extremum(eval_fn, x0: float, step: float, order: int, tol: float = 1.0e-11) -> float:
    """Newton on the `order`-th derivative's zero near x0 (an extremum of the
    (order-1)-th), safeguarded to stay within +-2*step of the seed."""
    x = x0
    for _ in range(40):
        g = eval_fn(x, order)
        h = eval_fn(x, order + 1)
        if h == 0.0:
            break
        dx = -g / h
        if abs(dx) > step:
            dx = math.copysign(step, dx)
        x += dx
        if abs(x - x0) > 2.0 * step + 1e-9:
            raise PrecisionError("extremum polish wandered out of its bracket")
        if abs(dx) <= tol:
            return x
    raise PrecisionError("extremum polish did not converge")


def find_boundary_and_peak(
    T_seed: PrecReal,
    cfg: ZEvalConfig,
    eval_fn: Optional[Callable] = None,
    search_span: float = 1.5,
    max_attempts: int = 6,
) -> Window:
    """Assemble a Window near a large positive peak of Z.

    Finds the peak T_M (maximum of Z near the seed), brackets it with the
    nearest local maxima of Z' on each side, sets T as their midpoint and a
    as the half-gap (so Z' is locally maximal at both edges), and collects
    the interior zeros.  Windows with even zero count are rejected and the
    bracket widened to the next Z' maximum; if no odd-count window is found
    within max_attempts, raises WindowRejection.

    eval_fn(offset, k), offsets relative to T_seed, may replace Z (used by
    the synthetic tests).
    """
    Tv = T_seed.value if isinstance(T_seed, PrecReal) else mpf(T_seed)
    prec = max(phase_prec(Tv), 120)
    if eval_fn is None:
        def eval_fn(off: float, k: int) -> float:
            return float(z_deriv(_abs_t(Tv, off, prec), k, cfg))

    gap = math.pi / float(theta_prime(Tv))
    step = gap / 8.0
    m = max(int(math.ceil(2 * search_span / step)), 16)
    offs = np.linspace(-search_span, search_span, m + 1)
    z0 = np.array([eval_fn(float(o), 0) for o in offs])
    ipk = int(np.argmax(z0))
    peak_off = _polish_extremum(eval_fn, float(offs[ipk]), step, 1)
    z_pk = eval_fn(peak_off, 0)

    z1 = np.array([eval_fn(float(o), 1) for o in offs])
    is_max = np.zeros(len(offs), bool)
    is_max[1:-1] = (z1[1:-1] > z1[:-2]) & (z1[1:-1] > z1[2:])
    cand = [float(offs[i]) for i in np.where(is_max)[0]]
    left = sorted(c for c in cand if c < peak_off)
    right = sorted(c for c in cand if c > peak_off)
    if not left or not right:
        raise WindowRejection("no Z' local maxima bracketing the peak in range")

    li, ri = len(left) - 1, 0
    for _attempt in range(max_attempts):
        lo_edge = _polish_extremum(eval_fn, left[li], step, 2)
        hi_edge = _polish_extremum(eval_fn, right[ri], step, 2)
        with workprec(prec):
            Tc = Tv + (mpf(lo_edge) + mpf(hi_edge)) / 2
            ac = (mpf(hi_edge) - mpf(lo_edge)) / 2
        Tp = PrecReal(Tc, prec)
        ap = PrecReal(ac, prec)

        def shifted(off: float, k: int, _d=float(Tc - Tv)) -> float:
            return eval_fn(off + _d, k)

        try:
            zs = find_zeros(Tp, ap, cfg, eval_fn=shifted, require_odd=True)
        except WindowRejection:
            # widen: alternate sides outward, preferring the right
            if ri + 1 < len(right):
                ri += 1
            elif li > 0:
                li -= 1
            else:
                break
            continue
        if not zs:
            break
        return Window(
            T=Tp,
            a=ap,
            zeros=zs,
            zprime_max_at_edges=(True, True),
            t_peak=_abs_t(Tv, peak_off, prec),
            z_peak=PrecReal.from_float(z_pk, 64),
        )
    raise WindowRejection("no odd-count window found within the search budget")


def edge_zprime_flags(win: Window, cfg: ZEvalConfig, eval_fn=None) -> tuple:
    """Diagnostic: is Z' locally maximal at each window edge (three-point
    test at +-average-gap/16)."""
    Tv = win.T.value
    prec = max(phase_prec(Tv), 120)
    if eval_fn is None:
        def eval_fn(off: float, k: int) -> float:
            return float(z_deriv(_abs_t(Tv, off, prec), k, cfg))
    h = math.pi / float(theta_prime(Tv)) / 16.0
    flags = []
    for edge in (-float(win.a.value), float(win.a.value)):
        c = eval_fn(edge, 1)
        flags.append(c > eval_fn(edge - h, 1) and c > eval_fn(edge + h, 1))
    return tuple(flags)


def build_window(
    T: PrecReal,
    a: PrecReal,
    cfg: ZEvalConfig,
    peak_search: float = 1.2,
) -> Window:
    """Window for externally chosen (T, a): find the zeros (odd count
    required), locate the peak T_M right of T + a, and record edge flags."""
    zs = find_zeros(T, a, cfg, require_odd=True)
    if not zs:
        raise WindowRejection("window contains no zeros")
    Tv = T.value
    prec = max(phase_prec(Tv), 120)

    def ev(off: float, k: int) -> float:
        return float(z_deriv(_abs_t(Tv, off, prec), k, cfg))

    gap = math.pi / float(theta_prime(Tv))
    step = gap / 8.0
    av = float(a.value)
    offs = np.arange(av, av + peak_search + step, step)
    vals = np.array([ev(float(o), 0) for o in offs])
    ipk = int(np.argmax(vals))
    peak_off = _polish_extremum(ev, float(offs[ipk]), step, 1)
    zpk = ev(peak_off, 0)
    win = Window(
        T=T,
        a=a,
        zeros=zs,
        zprime_max_at_edges=(False, False),
        t_peak=_abs_t(Tv, peak_off, prec),
        z_peak=PrecReal.from_float(zpk, 64),
    )
    flags = edge_zprime_flags(win, cfg)
    return Window(
        T=T,
        a=a,
        zeros=zs,
        zprime_max_at_edges=flags,
        t_peak=win.t_peak,
        z_peak=win.z_peak,
    )


# ---------------------------------------------------------------------------
# Even-derivative bound


def z2k_bound(T: PrecReal, a: PrecReal, K: int) -> PrecReal:
    """min(log T, 3 zeta(1/2 + 2K/theta'(T))) * theta'(T)^{2K}, the uniform
    window bound on |Z^(2K)|; requires theta'(T)/4 < K <= (7/8) theta'(T)
    and 0 < a < 1.  mpf exponents absorb the huge power."""
    Tv = T.value if isinstance(T, PrecReal) else mpf(T)
    av = float(a.value if isinstance(a, PrecReal) else a)
    if not (0 < av < 1):
        raise ContractError(f"z2k_bound needs 0 < a < 1, got {av}")
    wp = max(T.prec if isinstance(T, PrecReal) else 128, 150)
    with workprec(wp):
        tp = theta_prime(Tv, wp)
        ratio = 2 * mpf(K) / tp
        if not (mpf(1) / 2 < ratio <= mpf(7) / 4):
            raise ContractError(
                f"z2k_bound requires theta'/4 < K <= (7/8) theta'; "
                f"2K/theta' = {float(ratio):.4f}"
            )
        front = min(mp.log(Tv), 3 * zeta_real(mpf(1) / 2 + ratio, wp))
        return PrecReal(front * mp.exp(2 * K * mp.log(tp)), wp)


# ---------------------------------------------------------------------------
# Ingestion: zero offsets and sample files


def read_zero_offsets(path: str, prec: int = 200):
    """Parse the plain-text offset format: header '# T=<decimal>', then one
    'gamma_k - T' decimal per line, ascending.  Returns (T, offsets) as
    (PrecReal, tuple[PrecReal])."""
    T = None
    offsets = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IngestError(f"cannot read zero file {path}: {exc}") from exc
    with workprec(prec):
        for ln_no, raw in enumerate(lines, 1):
            s = raw.strip()
            if not s:
                continue
            if s.startswith("#"):
                if s.replace(" ", "").startswith("#T="):
                    body = s.split("=", 1)[1].strip()
                    try:
                        T = PrecReal.from_decimal(body, prec)
                    except Exception as exc:
                        raise IngestError(
                            f"{path}:{ln_no}: bad T value {body!r}"
                        ) from exc
                continue
            if T is None:
                raise IngestError(f"{path}: offsets before the '# T=' header")
            try:
                v = mpf(s)
            except Exception as exc:
                raise IngestError(f"{path}:{ln_no}: bad offset {s!r}") from exc
            if offsets and v < offsets[-1]:
                raise IngestError(f"{path}:{ln_no}: offsets must be ascending")
            offsets.append(v)
    if T is None:
        raise IngestError(f"{path}: missing '# T=' header")
    if not offsets:
        raise IngestError(f"{path}: no offsets")
    return T, tuple(PrecReal(o, prec) for o in offsets)


def read_samples(path: str, prec: int = 200):
    """Parse the sample format: lines of '<t - T> <Z(t)>', comments with '#'.
    Returns a list of (offset, value) mpf pairs sorted by offset."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IngestError(f"cannot read sample file {path}: {exc}") from exc
    out = []
    with workprec(prec):
        for ln_no, raw in enumerate(lines, 1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise IngestError(f"{path}:{ln_no}: expected two columns")
            try:
                out.append((mpf(parts[0]), mpf(parts[1])))
            except Exception as exc:
                raise IngestError(f"{path}:{ln_no}: bad number") from exc
    if not out:
        raise IngestError(f"{path}: no samples")
    out.sort(key=lambda p: p[0])
    for (x0, _), (x1, _) in zip(out[:-1], out[1:]):
        if x0 == x1:
            raise IngestError(f"{path}: duplicate sample abscissa {float(x0)}")
    return out


def fd_derivatives(
    samples: Sequence,
    x0,
    orders: Sequence[int],
    extra: int = 4,
    prec: int = 200,
):
    """Derivatives at x0 from scattered samples by polynomial interpolation.

    Chooses the max(orders)+1+extra samples nearest x0, builds the Newton
    divided-difference polynomial, re-expands it about x0, and reads the
    requested derivatives off the Taylor coefficients.  The stencil order is
    a caller decision (`extra` adds slack points beyond the minimum).
    """
    if not orders:
        return {}
    kmax = max(orders)
    npts = kmax + 1 + extra
    if npts > len(samples):
        raise ContractError(
            f"need {npts} samples for order {kmax} with {extra} extra, "
            f"have {len(samples)}"
        )
    with workprec(prec):
        x0 = mpf(x0)
        chosen = sorted(samples, key=lambda p: abs(p[0] - x0))[:npts]
        chosen.sort(key=lambda p: p[0])
        xs = [mpf(p[0]) for p in chosen]
        ys = [mpf(p[1]) for p in chosen]
        # divided-difference coefficients in Newton form
        col = list(ys)
        coef = [col[0]]
        for j in range(1, npts):
            col = [
                (col[i + 1] - col[i]) / (xs[i + j] - xs[i])
                for i in range(npts - j)
            ]
            coef.append(col[0])
        # re-expand about x0: maintain Taylor coefficients in (x - x0)
        taylor = [coef[-1]]
        for i in range(npts - 2, -1, -1):
            shift = x0 - xs[i]
            nxt = [mpf(0)] * (len(taylor) + 1)
            for j, c in enumerate(taylor):
                nxt[j + 1] += c
                nxt[j] += c * shift
            nxt[0] += coef[i]
            taylor = nxt
        out = {}
        for j in orders:
            if j < len(taylor):
                out[j] = PrecReal(+(taylor[j] * mp.factorial(j)), prec)
            else:
                out[j] = PrecReal(mpf(0), prec)
        return out
