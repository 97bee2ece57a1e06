"""Node-weight kernels, their boundary coefficients, and the bound chain.

Central objects: for nodes x_0..x_n in (-a, a) with u_k = sin(pi x_k / 2a),
the kernel

    psi_{2l-1}(x) = (4a)^{2l-1} / (2l)! * ddu[ G_x ](u_0, ..., u_n),
    G_x(u) = B_{2l}(1/2 + (x + (2a/pi) Arcsin u)/(4a))
           + B_{2l}({ (x - (2a/pi) Arcsin u)/(4a) }),

where ddu is the divided difference over u and B the Bernoulli polynomials.
From it: the boundary coefficients alpha/beta, the scaled derivative data d,
the tail constant c_{2l-1,r}, the bound e_{2K,n}, the L2 norm, and a
quadrature harness that verifies the summation-by-parts identity

    sum_{k=1}^r [psi*_{2k-1}(a) f^(2k-1)(a) - psi*_{2k-1}(-a) f^(2k-1)(-a)]
        = Int_{-a}^{a} psi*_{2r-1}(x) f^(2r)(x) dx

for test functions f vanishing at the nodes (2r >= n+2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

from mpmath import mp, mpf, workprec

from .divdiff import divided_difference
from .errors import ContractError, PrecisionError
from .numkernel import (
    BERNOULLI,
    LogMag,
    PrecReal,
    frac,
    theta,
    theta_prime,
    zeta_real,
)
from .quadrules import integrate_piecewise

_COINCIDENT_REL = mpf(10) ** -13  # closer than this (relative to a) counts as equal


# ---------------------------------------------------------------------------
# Node sets


@dataclass(frozen=True)
class NodeSet:
    """Half-width a > 0 plus nodes x_0 <= ... <= x_n strictly inside (-a, a).

    Nodes are stored sorted ascending (the divided difference is symmetric, so
    this is a harmless canonical form); coincident entries are allowed and
    routed through the perturbation path by the evaluators.
    """

    a: PrecReal
    nodes: tuple

    def __post_init__(self):
        if not isinstance(self.a, PrecReal):
            raise ContractError("NodeSet.a must be a PrecReal")
        if not self.a.value > 0:
            raise ContractError("NodeSet half-width a must be positive")
        if len(self.nodes) < 1:
            raise ContractError("NodeSet needs at least one node")
        nodes = tuple(
            x if isinstance(x, PrecReal) else PrecReal.from_float(float(x), self.a.prec)
            for x in self.nodes
        )
        nodes = tuple(sorted(nodes, key=lambda p: p.value))
        for x in nodes:
            if not (abs(x.value) < self.a.value):
                raise ContractError(
                    f"node {float(x.value)} outside (-a, a) with a={float(self.a.value)}"
                )
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_floats(cls, a: float, xs: Sequence[float], prec: int = 200) -> "NodeSet":
        return cls(
            PrecReal.from_float(a, prec),
            tuple(PrecReal.from_float(x, prec) for x in xs),
        )

    @property
    def n(self) -> int:
        return len(self.nodes) - 1

    @property
    def working_prec(self) -> int:
        return max([self.a.prec] + [x.prec for x in self.nodes])

    def u_values(self, prec: Optional[int] = None):
        """u_k = sin(pi x_k / (2a)) as mpfs at the given precision."""
        wp = prec if prec is not None else self.working_prec
        with workprec(wp):
            a = self.a.value
            return [mp.sin(mp.pi * x.value / (2 * a)) for x in self.nodes]

    def has_coincident(self) -> bool:
        wp = self.working_prec
        with workprec(wp):
            tol = self.a.value * _COINCIDENT_REL
            for p, q in zip(self.nodes[:-1], self.nodes[1:]):
                if q.value - p.value <= tol:
                    return True
        return False


def mu_weights(ns: NodeSet):
    """Reciprocal-product weights mu_k = 1 / prod_{j != k} (u_k - u_j).

    These are the weights of the divided difference on the u abscissae:
    dd[f] = sum_k f(u_k) mu_k.  Requires pairwise distinct nodes; coincident
    nodes must go through the psi perturbation path instead.
    """
    if ns.has_coincident():
        raise ContractError(
            "mu_weights needs pairwise distinct nodes; "
            "use psi's coincident-node path instead"
        )
    wp = ns.working_prec + 4 * ns.n + 40
    with workprec(wp):
        us = ns.u_values(wp)
        out = []
        for k, uk in enumerate(us):
            p = mpf(1)
            for j, uj in enumerate(us):
                if j != k:
                    p *= uk - uj
            out.append(PrecReal(1 / p, wp))
        return tuple(out)


# ---------------------------------------------------------------------------
# The kernel psi


def _g_factory(l: int, a, x, prec: int):
    """G_x(u) at working precision; both Bernoulli arguments stay in [0, 1)
    for u in [-1, 1], the second via the fractional-part wrap."""
    two_l = 2 * l

    def g(u):
        # arcsin argument can drift a hair outside [-1, 1] from upstream
        # rounding; clamp within one ulp only
        if u > 1:
            u = mpf(1)
        elif u < -1:
            u = mpf(-1)
        w = (2 * a / mp.pi) * mp.asin(u)
        arg1 = mpf(1) / 2 + (x + w) / (4 * a)
        arg2 = frac((x - w) / (4 * a))
        return BERNOULLI.eval(two_l, arg1, prec) + BERNOULLI.eval(two_l, arg2, prec)

    return g


def _psi_prefactor(l: int, a, prec: int):
    with workprec(prec):
        return (4 * a) ** (2 * l - 1) / mp.factorial(2 * l)


def psi(l: int, ns: NodeSet, x: PrecReal) -> PrecReal:
    """The kernel psi_{2l-1}(x_0..x_n, x) for x in [-a, a].

    Boundary x = +-a is valid for any l >= 1; interior x with coincident
    nodes requires 2l >= n+2 (the continuous-extension regime).  Coincident
    nodes are resolved by the symmetric u-spread with Richardson agreement.
    """
    if l < 1:
        raise ContractError(f"psi needs l >= 1, got {l}")
    if not isinstance(x, PrecReal):
        raise ContractError("psi evaluation point must be a PrecReal")
    wp = max(ns.working_prec, x.prec, 200) + 10 * (ns.n + 1) + 2 * l
    with workprec(wp):
        a = ns.a.value
        xv = x.value
        if abs(xv) > a:
            raise ContractError(f"psi evaluation point {float(xv)} outside [-a, a]")
        boundary = abs(xv) == a
        if ns.has_coincident() and not boundary and 2 * l < ns.n + 2:
            raise ContractError(
                f"interior psi with coincident nodes requires 2l >= n+2 "
                f"(got l={l}, n={ns.n})"
            )
        g = _g_factory(l, a, xv, wp)
        us = ns.u_values(wp)
        dd = divided_difference(g, us, prec=wp, lo=mpf(-1), hi=mpf(1))
        val = _psi_prefactor(l, a, wp) * dd
        return PrecReal(+val, wp)


def _psi_sampler(l: int, ns: NodeSet, prec: int) -> Callable:
    """Many-x evaluator with the weights precomputed (distinct nodes) or the
    generic path (coincident).  Returns x(mpf) -> psi value (mpf)."""
    wp = prec
    with workprec(wp):
        a = ns.a.value
        us = ns.u_values(wp)
        pref = _psi_prefactor(l, a, wp)
    distinct = not ns.has_coincident()
    if distinct:
        with workprec(wp):
            mus = []
            for k, uk in enumerate(us):
                p = mpf(1)
                for j, uj in enumerate(us):
                    if j != k:
                        p *= uk - uj
                mus.append(1 / p)

        def sample(xv):
            with workprec(wp):
                g = _g_factory(l, a, xv, wp)
                acc = mpf(0)
                for uk, muk in zip(us, mus):
                    acc += g(uk) * muk
                return pref * acc

        return sample

    def sample_generic(xv):
        with workprec(wp):
            g = _g_factory(l, a, xv, wp)
            dd = divided_difference(g, us, prec=wp, lo=mpf(-1), hi=mpf(1))
            return pref * dd

    return sample_generic


# ---------------------------------------------------------------------------
# Vanishing test functions for the identity harness


class VanishingTestFunction:
    """f = W * g with W(x) = prod_k (x - x_k) and g of known derivatives.

    Derivatives come from the Leibniz rule; W's derivative coefficients are
    expanded once.  Calling with (x, j) returns f^(j)(x).  g_deriv(x, j) must
    return the j-th derivative of g; the default g is the constant 1.
    """

    def __init__(self, ns: NodeSet, g_deriv: Optional[Callable] = None, prec: Optional[int] = None):
        self.ns = ns
        self.prec = prec if prec is not None else ns.working_prec + 40
        self.g_deriv = g_deriv if g_deriv is not None else (
            lambda x, j: mpf(1) if j == 0 else mpf(0)
        )
        with workprec(self.prec):
            coeffs = [mpf(1)]  # ascending; starts as the unit polynomial
            for xk in ns.nodes:
                r = xk.value
                nxt = [mpf(0)] * (len(coeffs) + 1)
                for i, c in enumerate(coeffs):
                    nxt[i + 1] += c
                    nxt[i] -= c * r
                coeffs = nxt
        self._dcoeffs = [coeffs]  # index j -> coefficients of W^(j), ascending

    def _wderiv_coeffs(self, j: int):
        while len(self._dcoeffs) <= j:
            prev = self._dcoeffs[-1]
            self._dcoeffs.append([c * (i + 1) for i, c in enumerate(prev[1:])])
        return self._dcoeffs[j]

    def w_value(self, x, j: int = 0):
        cs = self._wderiv_coeffs(j)
        if not cs:
            return mpf(0)
        with workprec(self.prec):
            acc = mpf(0)
            for c in reversed(cs):
                acc = acc * x + c
            return acc

    def __call__(self, x, j: int = 0):
        with workprec(self.prec):
            x = mpf(x)
            deg = len(self._dcoeffs[0]) - 1
            acc = mpf(0)
            for i in range(min(j, deg) + 1):
                acc += math.comb(j, i) * self.w_value(x, i) * self.g_deriv(x, j - i)
            return acc


def verify_identity(f, ns: NodeSet, r: int) -> PrecReal:
    """|LHS - RHS| of the summation-by-parts identity for f vanishing at the
    nodes, with 2r >= n+2.

    f must be callable as f(x, j) -> j-th derivative at x (mpf in/out), e.g. a
    VanishingTestFunction.  The right side integrates psi_{2r-1} * f^(2r) with
    panel splits at every node (kink points of the fractional-part term).
    """
    if 2 * r < ns.n + 2:
        raise ContractError(f"verify_identity needs 2r >= n+2 (r={r}, n={ns.n})")
    wp = max(ns.working_prec, 200)
    a = ns.a.value
    with workprec(wp):
        lhs = mpf(0)
        for k in range(1, r + 1):
            pa = psi(k, ns, ns.a).value
            pm = psi(k, ns, -ns.a).value
            lhs += pa * f(a, 2 * k - 1) - pm * f(-a, 2 * k - 1)
        sampler = _psi_sampler(r, ns, wp + 10 * (ns.n + 1))

        def integrand(x):
            return sampler(x) * f(x, 2 * r)

        edges = [-a] + [x.value for x in ns.nodes] + [a]
        rhs, est = integrate_piecewise(
            integrand, edges, npts=16, prec=wp, abs_tol=mpf(10) ** (-wp // 8)
        )
        return PrecReal(abs(lhs - rhs), wp)


# ---------------------------------------------------------------------------
# The tail constant and the derivative bound


@lru_cache(maxsize=None)
def c_constant(l: int, r: int) -> LogMag:
    """c_{2l-1,r} = sqrt( sum_{s>=0} [ (r/(r+s))^{2l-1} C(2r+s-1, s) ]^2 ),
    truncated once a geometric tail bound drops below 1e-25 of the partial sum.

    Requires l >= r+1 (the regime where the sum converges fast); the terms are
    accumulated as mpfs, whose unbounded exponents absorb the huge binomials.
    """
    if r < 1 or l < r + 1:
        raise ContractError(f"c_constant requires l >= r+1 >= 2, got l={l}, r={r}")
    cutoff = mpf(10) ** -25
    with workprec(150):
        two_l1 = 2 * l - 1
        b = mpf(1)  # C(2r+s-1, s) at s = 0
        total = mpf(0)
        s = 0
        budget = 10_000_000
        while True:
            term = (mpf(r) / (r + s)) ** two_l1 * b
            t2 = term * term
            total += t2
            # ratio of consecutive squared terms
            q = ((mpf(r + s) / (r + s + 1)) ** two_l1 * (mpf(2 * r + s) / (s + 1))) ** 2
            if q < 1:
                tail = t2 * q / (1 - q)
                if tail < cutoff * total:
                    break
            s += 1
            if s > budget:
                raise ContractError(
                    f"c_constant tail not converging within budget at l={l}, r={r}"
                )
            b = b * (2 * r + s - 1) / s
        return LogMag(1, mp.log10(total) / 2)


def e_bound(K: int, n: int, T: PrecReal, a: PrecReal) -> LogMag:
    """The derivative-tail bound
        e_{2K,n} = 2^{n-1/2} c_{2K-1,n} (2 a theta'(T) / (n pi))^{2K}
                   * min(log T, 3 zeta(1/2 + 2K/theta'(T))),
    in the log domain (n in the thousands overflows any fixed float).
    """
    if K < n + 1:
        raise ContractError(f"e_bound requires K >= n+1, got K={K}, n={n}")
    wp = max(T.prec, a.prec, 150)
    with workprec(wp):
        tp = theta_prime(T.value, wp)
        ratio = 2 * mpf(K) / tp
        if not (mpf(1) / 2 < ratio <= mpf(7) / 4):
            raise ContractError(
                f"e_bound requires theta'(T)/4 < K <= (7/8) theta'(T); "
                f"got 2K/theta' = {float(ratio):.4f}"
            )
        logT = mp.log(T.value)
        zval = 3 * zeta_real(mpf(1) / 2 + ratio, wp)
        last = min(logT, zval)
        lg10 = (
            (n - mpf(1) / 2) * mp.log10(2)
            + c_constant(K, n).log10
            + 2 * K * mp.log10(2 * a.value * tp / (n * mp.pi))
            + mp.log10(last)
        )
        return LogMag(1, +lg10)


# ---------------------------------------------------------------------------
# Coefficient tables


@dataclass(frozen=True)
class CoeffTable:
    """The boundary-coefficient table: for k = 1..K the scaled pairs
    (beta^+, d^+) and (beta^-, d^-), the bound e_{2K,n}, and the combined
    left side lhs = |sum beta+ d+ + sum beta- d-| with its ratio to the bound.
    """

    K: int
    beta_plus: tuple
    d_plus: tuple
    beta_minus: tuple
    d_minus: tuple
    e_bound: LogMag
    lhs: PrecReal
    ratio: float

    def rows(self):
        """(2k-1, beta+, d+, beta-, d-) per k, as floats for display."""
        out = []
        for i in range(self.K):
            out.append(
                (
                    2 * i + 1,
                    float(self.beta_plus[i]),
                    float(self.d_plus[i]),
                    float(self.beta_minus[i]),
                    float(self.d_minus[i]),
                )
            )
        return out

    def csv_text(self) -> str:
        lines = ["order,beta_plus,d_plus,beta_minus,d_minus"]
        for row in self.rows():
            lines.append(
                "%d,%.6g,%.6g,%.6g,%.6g" % row
            )
        return "\n".join(lines) + "\n"

    def json_dict(self) -> dict:
        return {
            "K": self.K,
            "orders": [2 * i + 1 for i in range(self.K)],
            "beta_plus": [b.to_decimal() for b in self.beta_plus],
            "d_plus": [d.to_decimal() for d in self.d_plus],
            "beta_minus": [b.to_decimal() for b in self.beta_minus],
            "d_minus": [d.to_decimal() for d in self.d_minus],
            "e_bound_log10": mp.nstr(self.e_bound.log10, 20),
            "lhs": self.lhs.to_decimal(),
            "lhs_over_bound": self.ratio,
        }

    def json_text(self) -> str:
        return json.dumps(self.json_dict(), sort_keys=True, indent=2) + "\n"


def coeff_table(win, K: int, derivs_plus: Sequence, derivs_minus: Sequence) -> CoeffTable:
    """Build the coefficient table for a populated window.

    derivs_plus/minus are Z^(2k-1)(T +- a) for k = 1..K (PrecReal or mpf).
    Asserts the bound  |sum beta+ d+ + sum beta- d-| <= e_{2K,n}  and, for odd
    n, that every beta is strictly positive; violations abort the run since
    they mean an internal inconsistency rather than a data problem.
    """
    ns = win.node_set()
    n = ns.n
    if K < n + 1:
        raise ContractError(f"coeff_table requires K >= n+1, got K={K}, n={n}")
    if len(derivs_plus) != K or len(derivs_minus) != K:
        raise ContractError("derivative sequences must have length K")
    wp = max(ns.working_prec, 200)
    with workprec(wp):
        tp = theta_prime(win.T.value, wp)
        bp, dp, bm, dm = [], [], [], []
        lhs = mpf(0)
        for k in range(1, K + 1):
            sgn = -1 if k % 2 == 0 else 1  # (-1)^(k+1)
            psi_a = psi(k, ns, ns.a).value
            psi_ma = psi(k, ns, -ns.a).value
            alpha_p = psi_a
            alpha_m = -psi_ma
            zp = derivs_plus[k - 1]
            zm = derivs_minus[k - 1]
            zp = zp.value if isinstance(zp, PrecReal) else mpf(zp)
            zm = zm.value if isinstance(zm, PrecReal) else mpf(zm)
            tpk = tp ** (2 * k - 1)
            bp.append(PrecReal(sgn * alpha_p * tpk, wp))
            dp.append(PrecReal(sgn * zp / tpk, wp))
            bm.append(PrecReal(sgn * alpha_m * tpk, wp))
            dm.append(PrecReal(sgn * zm / tpk, wp))
            lhs += alpha_p * zp + alpha_m * zm
        lhs = abs(lhs)
        if n % 2 == 1:
            for seq, tag in ((bp, "beta+"), (bm, "beta-")):
                for i, b in enumerate(seq):
                    if not b.value > 0:
                        raise ContractError(
                            f"internal inconsistency: {tag}[{2 * i + 1}] = "
                            f"{float(b.value)} not positive with odd n={n}"
                        )
        e = e_bound(K, n, win.T, win.a)
        lhs_lm = LogMag.from_real(lhs, wp)
        if lhs_lm.compare_abs(e) > 0:
            raise ContractError(
                f"internal inconsistency: |sum beta d| = {lhs_lm.sci()} exceeds "
                f"bound {e.sci()}"
            )
        ratio = float((lhs_lm / e).to_float()) if lhs_lm.sign != 0 else 0.0
        return CoeffTable(
            K=K,
            beta_plus=tuple(bp),
            d_plus=tuple(dp),
            beta_minus=tuple(bm),
            d_minus=tuple(dm),
            e_bound=e,
            lhs=PrecReal(lhs, wp),
            ratio=ratio,
        )


# ---------------------------------------------------------------------------
# L2 norm


def psi_norm2(l: int, ns: NodeSet) -> PrecReal:
    """L2(-a, a) norm of psi_{2l-1}(x_0..x_n, .) by node-split quadrature.

    Requires l >= n+1 (which also makes every interior evaluation valid for
    coincident nodes, since then 2l >= n+2).
    """
    if l < ns.n + 1:
        raise ContractError(f"psi_norm2 requires l >= n+1, got l={l}, n={ns.n}")
    wp = max(ns.working_prec, 160)
    sampler = _psi_sampler(l, ns, wp)
    with workprec(wp):
        a = ns.a.value
        edges = [-a] + [x.value for x in ns.nodes] + [a]

        def integrand(x):
            v = sampler(x)
            return v * v

        val, _est = integrate_piecewise(
            integrand, edges, npts=16, prec=wp, abs_tol=mpf(10) ** (-wp // 8)
        )
        return PrecReal(mp.sqrt(val), wp)


def psi_norm2_bound(l: int, ns: NodeSet) -> LogMag:
    """The closed-form majorant  2^{n-1} c_{2l-1,n} a^{-1/2} (2a/(n pi))^{2l}
    for the L2 norm, l >= n+1."""
    n = ns.n
    if l < n + 1:
        raise ContractError(f"psi_norm2_bound requires l >= n+1, got l={l}, n={n}")
    with workprec(160):
        a = ns.a.value
        lg = (
            (n - 1) * mp.log10(2)
            + c_constant(l, n).log10
            - mp.log10(a) / 2
            + 2 * l * mp.log10(2 * a / (n * mp.pi))
        )
        return LogMag(1, +lg)


# ---------------------------------------------------------------------------
# Mean-offset diagnostic


@dataclass(frozen=True)
class MeanSineRecord:
    """Diagnostic pairing of sum_k sin(pi x_k / 2a) with the window-local
    count increment (n+1) - (theta(T+a) - theta(T-a))/pi; absolute zero-count
    remainders are not computable here and stay out of scope."""

    sum_sin: PrecReal
    delta_s_window: PrecReal
    delta_s_estimate: float
    count: int
    expected_count: PrecReal


def mean_sine_check(win, delta_s_estimate: float = 0.0) -> MeanSineRecord:
    ns = win.node_set()
    wp = max(ns.working_prec, 200)
    with workprec(wp):
        a = ns.a.value
        s = mpf(0)
        for x in ns.nodes:
            s += mp.sin(mp.pi * x.value / (2 * a))
        T = win.T.value
        expected = (theta(T + a) - theta(T - a)) / mp.pi
        delta = (ns.n + 1) - expected
        return MeanSineRecord(
            sum_sin=PrecReal(+s, wp),
            delta_s_window=PrecReal(+delta, wp),
            delta_s_estimate=float(delta_s_estimate),
            count=ns.n + 1,
            expected_count=PrecReal(+expected, wp),
        )
