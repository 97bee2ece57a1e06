"""Gauss-Legendre quadrature at mpmath precision.

Nodes are seeded from numpy's float64 Legendre roots and Newton-polished to
the requested precision (the polynomial recurrences are stable at these
orders), then cached per (count, precision).  ``integrate_piecewise`` applies
a paired rule (m and 2m points) per panel and bisects panels until the two
levels agree, so callers get an honest error estimate.
"""

from __future__ import annotations

import numpy as np
from mpmath import mp, mpf, workprec

from .errors import PrecisionError

_node_cache: dict = {}


def _legendre_and_prime(k: int, x):
    """(P_k(x), P_k'(x)) by the three-term recurrence."""
    p0, p1 = mpf(1), x
    for j in range(2, k + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    # derivative from P_k and P_{k-1}
    dp = k * (x * p1 - p0) / (x * x - 1)
    return p1, dp


def gauss_legendre(npts: int, prec: int = 200):
    """Nodes and weights for [-1, 1] at `prec` bits, cached."""
    key = (npts, prec)
    if key in _node_cache:
        return _node_cache[key]
    seeds, _ = np.polynomial.legendre.leggauss(npts)
    nodes = []
    weights = []
    with workprec(prec + 20):
        for s in seeds:
            x = mpf(float(s))
            for _ in range(40):
                p, dp = _legendre_and_prime(npts, x)
                dx = p / dp
                x -= dx
                if abs(dx) < mpf(2) ** (-(prec + 10)):
                    break
            else:
                raise PrecisionError("Gauss-Legendre node failed to converge")
            _, dp = _legendre_and_prime(npts, x)
            w = 2 / ((1 - x * x) * dp * dp)
            nodes.append(+x)
            weights.append(+w)
    _node_cache[key] = (tuple(nodes), tuple(weights))
    return _node_cache[key]


def _panel(f, a, b, npts, prec):
    nodes, weights = gauss_legendre(npts, prec)
    with workprec(prec):
        half = (b - a) / 2
        mid = (a + b) / 2
        acc = mpf(0)
        for x, w in zip(nodes, weights):
            acc += w * f(mid + half * x)
        return acc * half


def integrate_piecewise(
    f,
    edges,
    npts: int = 16,
    prec: int = 200,
    abs_tol=None,
    max_depth: int = 10,
):
    """Integrate f over [edges[0], edges[-1]] splitting at the given interior
    edges (kink points), refining each panel until GL-npts and GL-2npts agree.

    Returns (value, error_estimate); raises PrecisionError if a panel fails to
    settle within max_depth bisections.
    """
    with workprec(prec):
        edges = [mpf(e) for e in edges]
        if abs_tol is None:
            abs_tol = mpf(2) ** (-(prec // 2))
        else:
            abs_tol = mpf(abs_tol)
        total = mpf(0)
        err = mpf(0)
        stack = [(a, b, 0) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        span = edges[-1] - edges[0]
        while stack:
            a, b, depth = stack.pop()
            coarse = _panel(f, a, b, npts, prec)
            fine = _panel(f, a, b, 2 * npts, prec)
            d = abs(fine - coarse)
            # panel budget proportional to its share of the range
            if d <= abs_tol * (b - a) / span or d <= abs_tol * mpf(2) ** -8:
                total += fine
                err += d
            elif depth >= max_depth:
                raise PrecisionError(
                    f"quadrature panel [{float(a)}, {float(b)}] stuck at error {float(d)}"
                )
            else:
                m = (a + b) / 2
                stack.append((a, m, depth + 1))
                stack.append((m, b, depth + 1))
        return +total, +err
