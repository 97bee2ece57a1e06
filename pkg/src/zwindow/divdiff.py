"""Divided differences over mpmath reals, with repeated-node support.

The plain Newton triangle handles distinct nodes.  Repeated nodes are
resolved by spreading each cluster symmetrically by a tiny eps (the
first-order error then cancels, since the partial derivatives of the
divided difference with respect to the members of an equal-node cluster
coincide), followed by one Richardson step on the remaining O(eps^2)
term and a digit-agreement check.  Precision and eps are escalated
together until the check passes.
"""

from __future__ import annotations

from mpmath import mp, mpf, workprec

from .errors import PrecisionError


def newton_triangle(f, xs):
    """Divided difference f[xs_0, ..., xs_n] for pairwise distinct xs,
    at the ambient precision."""
    col = [f(x) for x in xs]
    n1 = len(xs)
    for j in range(1, n1):
        col = [
            (col[i + 1] - col[i]) / (xs[i + j] - xs[i])
            for i in range(n1 - j)
        ]
    return col[0]


def _cluster(xs, tol):
    """Group sorted xs into clusters of width <= tol; return list of
    (value, multiplicity)."""
    groups = []
    for x in xs:
        if groups and abs(x - groups[-1][0]) <= tol:
            v, m = groups[-1]
            groups[-1] = (v, m + 1)
        else:
            groups.append((x, 1))
    return groups


def _spread_nodes(groups, eps, lo=None, hi=None):
    """Replace each cluster by a centered arithmetic spread of step eps.
    Clusters touching the interval ends are shifted inward to stay inside
    [lo, hi]."""
    out = []
    for v, m in groups:
        offsets = [eps * (i - mpf(m - 1) / 2) for i in range(m)]
        pts = [v + o for o in offsets]
        if lo is not None and pts[0] < lo:
            shift = lo - pts[0]
            pts = [p + shift for p in pts]
        if hi is not None and pts[-1] > hi:
            shift = pts[-1] - hi
            pts = [p - shift for p in pts]
        out.extend(pts)
    return out


def divided_difference(
    f,
    xs,
    prec: int = 200,
    lo=None,
    hi=None,
    target_digits: int = 12,
):
    """f[xs] allowing repeated entries.

    f must accept an mpf and return an mpf at the ambient precision.  lo/hi
    optionally bound the domain of f (spread points are kept inside).
    Returns an mpf; raises PrecisionError when the repeated-node
    extrapolation cannot reach `target_digits` agreement.
    """
    xs = sorted(mpf(x) for x in xs)
    with workprec(prec + 30):
        tol = mpf(2) ** (-(prec // 2))
        groups = _cluster(xs, tol)
        if all(m == 1 for _, m in groups):
            with workprec(prec + 30):
                val = newton_triangle(f, [v for v, _ in groups])
            return +val

        mmax = max(m for _, m in groups)
        eps_bits = 28
        wp = prec + 30 + (mmax - 1) * eps_bits * 2
        for _attempt in range(5):
            with workprec(wp):
                eps = mpf(2) ** (-eps_bits)
                g1 = newton_triangle(f, _spread_nodes(groups, eps, lo, hi))
                g2 = newton_triangle(f, _spread_nodes(groups, eps / 2, lo, hi))
                rich = (4 * g2 - g1) / 3
                scale = max(abs(rich), abs(g2))
                if scale == 0:
                    return mpf(0)
                if abs(rich - g2) <= scale * mpf(10) ** (-target_digits):
                    return +rich
            eps_bits += 10
            wp += (mmax - 1) * 20 + 40
        raise PrecisionError(
            "repeated-node divided difference did not stabilize "
            f"(multiplicity {mmax}, {len(xs) - 1} + 1 nodes)"
        )
