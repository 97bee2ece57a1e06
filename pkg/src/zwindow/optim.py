"""Structured minimization over ordered node configurations.

Problem (P): minimize the divided difference g(y_0..y_n) of

    f(t) = B_2(3/4 + Arcsin(t) / (2 pi))
         ( = B_2(1/2 + Arcsin(sqrt((1+t)/2)) / pi) ),

over nondecreasing y with tau_-(k) <= y_k <= tau_+(k) and a fixed sum.
The minimizer is head-plateau-tail shaped: y_k = tau_+(k) below J, a
constant plateau on J..L, and y_k = tau_-(k) above L, so the solver
enumerates all (J, L) pairs with O(1) incremental sums, filters by
feasibility, and evaluates the objective only for feasible candidates.

The objective has two routes: the elevated-precision Newton triangle for
small node counts, and, for the thousands-of-nodes regime, the positive
integral representation

    dd[f](y_0..y_n) = (1/2 pi^2) Int_0^inf w sinh(w)
                          prod_k (cosh w - y_k)^(-1) dw    (n >= 1),

evaluated in the log domain (the two routes agree to ~1e-12 on random
instances; the integral encodes repeated nodes exactly via multiplicities).

Downstream of the solver: tau_bounds (the window's box constraints), phi_c
(the full lower-bound pipeline for the first boundary coefficient), and the
simple mean-based lower bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from mpmath import mp, mpf, workprec

from .divdiff import divided_difference
from .errors import ContractError, InfeasibleError, PrecisionError
from .numkernel import BERNOULLI, LogMag, PrecReal, theta_prime

_FEAS_EPS = 1.0e-12       # slack for float feasibility filtering
_INTERIOR_EPS = 1.0e-12   # plateau must sit strictly inside (-1, 1)
_TRIANGLE_MAX_NODES = 64  # above this, the integral route takes over
_AUDIT_CAP = 100


# ---------------------------------------------------------------------------
# Problem and solution containers


@dataclass(frozen=True)
class ProblemP:
    """Box bounds tau_lo(k) <= y_k <= tau_hi(k), both nondecreasing in k,
    a fixed total sum, and the ordering (nondecreasing y) constraint."""

    n: int
    tau_lo: tuple
    tau_hi: tuple
    target_sum: float
    ordered: bool = True

    def __post_init__(self):
        if self.n < 0 or len(self.tau_lo) != self.n + 1 or len(self.tau_hi) != self.n + 1:
            raise ContractError("ProblemP bound arrays must have length n+1")
        lo = np.asarray(self.tau_lo, float)
        hi = np.asarray(self.tau_hi, float)
        if np.any(lo > hi + _FEAS_EPS):
            raise ContractError("ProblemP needs tau_lo <= tau_hi for every k")
        if np.any(np.diff(lo) < -_FEAS_EPS) or np.any(np.diff(hi) < -_FEAS_EPS):
            raise ContractError("ProblemP bounds must be nondecreasing in k")
        if np.any(lo < -1.0 - _FEAS_EPS) or np.any(hi > 1.0 + _FEAS_EPS):
            raise ContractError("ProblemP bounds must lie in [-1, 1]")
        s_lo = math.fsum(self.tau_lo)
        s_hi = math.fsum(self.tau_hi)
        if not (s_lo - 1e-9 <= self.target_sum <= s_hi + 1e-9):
            raise InfeasibleError(
                f"target sum {self.target_sum:.6f} outside "
                f"[{s_lo:.6f}, {s_hi:.6f}]"
            )
        object.__setattr__(self, "tau_lo", tuple(float(x) for x in self.tau_lo))
        object.__setattr__(self, "tau_hi", tuple(float(x) for x in self.tau_hi))


@dataclass(frozen=True)
class SolutionP:
    """Head-plateau-tail solution: y_k = tau_hi(k) for k < J, the constant
    plateau on J..L, tau_lo(k) for k > L; audit holds the best candidates'
    (J, L, log10 objective) triples."""

    y: tuple
    J: int
    L: int
    plateau: float
    objective: LogMag
    audit: tuple = ()

    @property
    def n(self) -> int:
        return len(self.y) - 1

    def json_dict(self) -> dict:
        y = list(self.y)
        if len(y) > 44:
            y_repr = {
                "head": y[:20],
                "tail": y[-20:],
                "omitted": len(y) - 40,
            }
        else:
            y_repr = {"full": y}
        return {
            "n": self.n,
            "J": self.J,
            "L": self.L,
            "plateau": self.plateau,
            "objective_log10": float(self.objective.log10),
            "objective_sign": self.objective.sign,
            "y": y_repr,
            "audit": [
                {"J": j, "L": l, "objective_log10": v} for j, l, v in self.audit
            ],
        }

    def json_text(self) -> str:
        return json.dumps(self.json_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# tau bounds


def tau_bounds(k: int, n: int, T: PrecReal, a, M_plus) -> tuple:
    """(tau_-(k), tau_+(k)) for the window's box constraints:

        tau_-(k) = -cos(max(q (k + 1 - M_plus), 0)),
        tau_+(k) = -cos(min(q (k + 2), pi)),      q = pi^2 / (2 a theta'(T)),

    with the residual shift in the tau_+ argument set to 0 (it is bounded by
    a^2/T, negligible at every supported height)."""
    if not (0 <= k <= n):
        raise ContractError(f"tau_bounds needs 0 <= k <= n, got k={k}, n={n}")
    Tv = T.value if isinstance(T, PrecReal) else mpf(T)
    av = float(a.value if isinstance(a, PrecReal) else a)
    with workprec(max(getattr(T, "prec", 128), 128)):
        q = float(mp.pi**2 / (2 * av * theta_prime(Tv)))
    mv = float(M_plus.value if isinstance(M_plus, PrecReal) else M_plus)
    lo = -math.cos(max(q * (k + 1 - mv), 0.0))
    hi = -math.cos(min(q * (k + 2), math.pi))
    return lo, hi


def _tau_arrays(n: int, q: float, m_plus: float):
    k = np.arange(n + 1, dtype=float)
    lo = -np.cos(np.maximum(q * (k + 1 - m_plus), 0.0))
    hi = -np.cos(np.minimum(q * (k + 2), np.pi))
    return lo, hi


# ---------------------------------------------------------------------------
# Objective


def _f_mpf(t):
    """f(t) = B_2(3/4 + Arcsin(t)/(2 pi)) at the ambient precision."""
    u = mpf(3) / 4 + mp.asin(t) / (2 * mp.pi)
    return BERNOULLI.eval(2, u, mp.prec)


def _objective_triangle(ys: Sequence[float], start_prec: int) -> LogMag:
    """Adaptive-precision divided difference of f; doubles the working
    precision until two consecutive runs agree to 10 significant digits."""
    prec = max(start_prec, 120)
    prev = None
    for _ in range(6):
        with workprec(prec + 40):
            val = divided_difference(
                _f_mpf, [mpf(y) for y in ys], prec=prec,
                lo=mpf(-1), hi=mpf(1),
            )
        if prev is not None:
            scale = max(abs(val), abs(prev))
            if scale == 0:
                return LogMag.zero()
            if abs(val - prev) <= scale * mpf(10) ** -10:
                return LogMag.from_real(val, prec)
        prev = val
        prec *= 2
    raise PrecisionError("objective divided difference did not stabilize")


def _log_integrand(w: np.ndarray, vals: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """log[w sinh w / prod (cosh w - y)^m] on a float64 grid, via
    cosh w - y = (1 - y) + 2 sinh^2(w/2) to keep small-w accuracy."""
    s2 = 2.0 * np.sinh(w / 2.0) ** 2
    A = np.log((1.0 - vals)[None, :] + s2[:, None])
    with np.errstate(divide="ignore"):
        return np.log(w) + np.log(np.sinh(w)) - A @ mult


def _objective_contour(vals: np.ndarray, mult: np.ndarray, rtol: float = 1.0e-9) -> LogMag:
    """The positive integral route, log-domain Gauss-Legendre with panel
    doubling until agreement; valid for n >= 1 and |y| < 1."""
    probe = np.geomspace(1.0e-8, 60.0, 500)
    lp = _log_integrand(probe, vals, mult)
    ipk = int(np.argmax(lp))
    pk = lp[ipk]
    keep = np.where(lp > pk - 60.0)[0]
    w_hi = probe[min(keep[-1] + 1, len(probe) - 1)] * 1.1
    w_pk = probe[ipk]
    edges = np.unique(
        np.concatenate(
            [np.linspace(0.0, w_pk, 8), np.geomspace(max(w_pk, 1e-7), w_hi, 10)]
        )
    )

    def quad(npts: int) -> float:
        x0, wq = np.polynomial.legendre.leggauss(npts)
        allw, allq = [], []
        for lo_e, hi_e in zip(edges[:-1], edges[1:]):
            if hi_e <= lo_e:
                continue
            allw.append(0.5 * (lo_e + hi_e) + 0.5 * (hi_e - lo_e) * x0)
            allq.append(0.5 * (hi_e - lo_e) * wq)
        aw = np.concatenate(allw)
        aq = np.concatenate(allq)
        lv = _log_integrand(aw, vals, mult)
        mx = lv.max()
        return float(mx + np.log(np.sum(aq * np.exp(lv - mx))))

    v1 = quad(48)
    v2 = quad(96)
    if abs(v1 - v2) > rtol * max(1.0, abs(v2)):
        v1, v2 = v2, quad(192)
        if abs(v1 - v2) > 10 * rtol * max(1.0, abs(v2)):
            raise PrecisionError("objective integral did not converge")
    log_e = v2 - math.log(2.0 * math.pi**2)
    return LogMag.from_log10(1, mpf(log_e) / mp.log(10))


def _group(ys: Sequence[float]):
    vals, mult = np.unique(np.asarray(ys, float), return_counts=True)
    return vals, mult.astype(float)


def objective_g(ys: Sequence[float]) -> LogMag:
    """Divided difference of f over the nodes y_0 <= ... <= y_n, as a LogMag.

    Nodes must be strictly inside (-1, 1) (the Arcsin derivative is singular
    at the ends); coincident nodes are fine.  Small node counts go through
    the adaptive triangle, large ones through the integral representation.
    """
    ys = [float(y) for y in ys]
    if not ys:
        raise ContractError("objective_g needs at least one node")
    for y in ys:
        if not (-1.0 < y < 1.0):
            raise ContractError(f"objective node {y} not strictly inside (-1, 1)")
    if len(ys) == 1:
        with workprec(120):
            return LogMag.from_real(_f_mpf(mpf(ys[0])), 120)
    if len(ys) <= _TRIANGLE_MAX_NODES:
        return _objective_triangle(sorted(ys), 4 * (len(ys) - 1))
    vals, mult = _group(ys)
    return _objective_contour(vals, mult)


# ---------------------------------------------------------------------------
# The structured solver


def _enumerate_feasible(prob: ProblemP):
    """All (J, L, plateau) with the head-plateau-tail shape satisfying the
    ordering, box, interior, and sum constraints."""
    n = prob.n
    lo = np.asarray(prob.tau_lo)
    hi = np.asarray(prob.tau_hi)
    target = prob.target_sum
    head = np.concatenate([[0.0], np.cumsum(hi)])          # head[j] = sum_{k<j} hi
    tail = np.concatenate([np.cumsum(lo[::-1])[::-1], [0.0]])  # tail[j] = sum_{k>=j} lo
    out = []
    for J in range(n + 1):
        L = np.arange(J, n + 1)
        m = (L - J + 1).astype(float)
        p = (target - head[J] - tail[L + 1]) / m
        ord_lo = hi[J - 1] if J > 0 else -1.0               # y_{J-1} <= p
        ord_hi = np.where(L < n, lo[np.minimum(L + 1, n)], 1.0)  # p <= y_{L+1}
        ok = (p >= ord_lo - _FEAS_EPS) & (p <= ord_hi + _FEAS_EPS)
        ok &= (p >= lo[L] - _FEAS_EPS) & (p <= hi[J] + _FEAS_EPS)
        ok &= (p > -1.0 + _INTERIOR_EPS) & (p < 1.0 - _INTERIOR_EPS)
        for i in np.where(ok)[0]:
            out.append((J, int(L[i]), float(p[i])))
    return out


def _assemble(prob: ProblemP, J: int, L: int):
    """Final y vector with the plateau recomputed by compensated sums."""
    head = list(prob.tau_hi[:J])
    tail = list(prob.tau_lo[L + 1 :])
    m = L - J + 1
    p = (prob.target_sum - math.fsum(head) - math.fsum(tail)) / m
    return head + [p] * m + tail, p


def _candidate_objective(prob: ProblemP, J: int, L: int, p: float) -> LogMag:
    ys = list(prob.tau_hi[:J]) + [p] * (L - J + 1) + list(prob.tau_lo[L + 1 :])
    if len(ys) <= _TRIANGLE_MAX_NODES:
        return _objective_triangle(sorted(ys), 4 * (len(ys) - 1))
    vals, mult = _group(ys)
    return _objective_contour(vals, mult)


def solve_p(prob: ProblemP) -> SolutionP:
    """Solve (P): enumerate the structured candidates, screen them on a
    shared probe grid, evaluate the best on the accurate route, and return
    the minimizer (ties broken by smallest J, then smallest L)."""
    if not prob.ordered:
        raise ContractError("only the ordered (nondecreasing y) variant is supported")
    s_lo = math.fsum(prob.tau_lo)
    s_hi = math.fsum(prob.tau_hi)
    if not (s_lo - 1e-9 <= prob.target_sum <= s_hi + 1e-9):
        raise InfeasibleError("target sum outside the box-feasible range")
    cands = _enumerate_feasible(prob)
    if not cands:
        raise ContractError(
            "no feasible head-plateau-tail candidate; the structured-solution "
            "assumptions do not hold for this instance"
        )

    if len(cands) > _AUDIT_CAP:
        # cheap screening on a shared log grid to rank candidates
        lo = np.asarray(prob.tau_lo)
        hi = np.asarray(prob.tau_hi)
        wg = np.geomspace(1.0e-6, 50.0, 400)
        s2 = 2.0 * np.sinh(wg / 2.0) ** 2
        ph = np.concatenate(
            [np.zeros((len(wg), 1)),
             np.cumsum(np.log((1.0 - hi)[None, :] + s2[:, None]), axis=1)],
            axis=1,
        )
        lo_rev = np.log((1.0 - lo[::-1])[None, :] + s2[:, None])
        pt = np.concatenate(
            [np.cumsum(lo_rev, axis=1)[:, ::-1], np.zeros((len(wg), 1))], axis=1
        )
        lws = np.log(wg) + np.log(np.sinh(wg))
        screened = []
        for J, L, p in cands:
            m = L - J + 1
            s = ph[:, J] + m * np.log((1.0 - p) + s2) + pt[:, L + 1]
            li = lws - s
            mx = li.max()
            val = mx + np.log(np.trapezoid(np.exp(li - mx), wg))
            screened.append((float(val), J, L, p))
        screened.sort(key=lambda c: (c[0], c[1], c[2]))
        shortlist = [(J, L, p) for _, J, L, p in screened[:_AUDIT_CAP]]
    else:
        shortlist = cands

    evaluated = []
    for J, L, p in shortlist:
        obj = _candidate_objective(prob, J, L, p)
        evaluated.append((obj, J, L, p))

    def _order(c):
        # ascending by signed value: big negatives, zero, small positives, ...
        obj = c[0]
        mag = float(obj.log10) if obj.sign else 0.0
        return (obj.sign, obj.sign * mag, c[1], c[2])

    evaluated.sort(key=_order)
    best_obj, bj, bl, _bp = evaluated[0]
    y, p_final = _assemble(prob, bj, bl)
    audit = tuple(
        (J, L, float(obj.log10) if obj.sign else -math.inf)
        for obj, J, L, _ in evaluated[:_AUDIT_CAP]
    )
    return SolutionP(
        y=tuple(y), J=bj, L=bl, plateau=p_final, objective=best_obj, audit=audit
    )


# ---------------------------------------------------------------------------
# The full lower-bound pipeline for the first boundary coefficient


def phi_c_solution(T: PrecReal, a, M_plus, c: float, r1: float = 0.0, r2: float = 0.0):
    """The full lower-bound pipeline, returning (bound, SolutionP, ProblemP).

    Builds the window's Problem (P): the node count comes from the
    mean-count relation plus the boundary-remainder push c * M_plus, the
    target sum from the mean-offset relation (same push), then solves (P)
    and scales the minimal objective by 4 a theta'(T).  r1 and r2 feed the
    two suppressed residual terms (count and mean, in units of M_plus);
    the computed path is r1 = r2 = 0, and both vanish like 1/log_3 T.
    """
    if not (0.0 < c < 1.0):
        raise ContractError(f"phi_c requires c in (0, 1), got {c}")
    Tv = T.value if isinstance(T, PrecReal) else mpf(T)
    av = float(a.value if isinstance(a, PrecReal) else a)
    if not (0.0 < av < 1.0):
        raise ContractError(f"phi_c requires 0 < a < 1, got {av}")
    mv = float(M_plus.value if isinstance(M_plus, PrecReal) else M_plus)
    if mv < 0:
        raise ContractError("M_plus must be nonnegative")
    wp = max(getattr(T, "prec", 128), 150)
    with workprec(wp):
        tp = theta_prime(Tv, wp)
        n_raw = float(2 * av / mp.pi * tp) + c * mv + r1 * mv
        q = float(mp.pi**2 / (2 * av * tp))
    n = int(math.floor(n_raw))
    if n < 1:
        raise ContractError(f"window too small: node count {n_raw:.3f} rounds below 1")
    lo, hi = _tau_arrays(n, q, mv)
    prob = ProblemP(
        n=n, tau_lo=tuple(lo), tau_hi=tuple(hi), target_sum=c * mv + r2 * mv
    )
    sol = solve_p(prob)
    with workprec(wp):
        scale = LogMag.from_real(4 * av * tp, wp)
    return scale * sol.objective, sol, prob


def phi_c(
    T: PrecReal,
    a,
    M_plus,
    c: float,
    r1: float = 0.0,
    r2: float = 0.0,
) -> LogMag:
    """Lower bound 4 a g* theta'(T) for the first boundary coefficient; see
    phi_c_solution for the construction details."""
    bound, _sol, _prob = phi_c_solution(T, a, M_plus, c, r1, r2)
    return bound


def beta1_simple_lower(n: int, a, tbar: float, T: PrecReal) -> PrecReal:
    """The mean-based floor  theta'(T) * 2 a (1 + tbar)^n / (3 pi^2 n^2);
    mpf exponents carry the (1 + tbar)^n factor at any n."""
    if n < 1:
        raise ContractError(f"beta1_simple_lower needs n >= 1, got {n}")
    if not (-1.0 < tbar < 1.0):
        raise ContractError(f"tbar must be in (-1, 1), got {tbar}")
    Tv = T.value if isinstance(T, PrecReal) else mpf(T)
    av = a.value if isinstance(a, PrecReal) else mpf(a)
    wp = max(getattr(T, "prec", 128), 150)
    with workprec(wp):
        tp = theta_prime(Tv, wp)
        val = tp * 2 * av * mp.exp(n * mp.log1p(mpf(tbar))) / (3 * mp.pi**2 * n**2)
        return PrecReal(+val, wp)
