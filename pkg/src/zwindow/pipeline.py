"""Orchestration: growth models, scenario bounds, and the end-to-end runs.

Everything here glues the other modules together and formats their output.
The asymptotic scenario formulas drop the O(.) and o(.) error terms on
purpose (each report carries a note saying so); the desk-scale runs
(window tables, diagnostics) are fully computed with no dropped terms.

Heights like 10^20000 are carried symbolically as (mantissa, exp10) so the
logarithm is exact up to mpf rounding; nothing stores twenty thousand
digits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

from mpmath import mp, mpf, workprec

from .errors import ContractError, IngestError
from .hardy import (
    Window,
    ZEvalConfig,
    build_window,
    expected_zero_count,
    fd_derivatives,
    find_zeros,
    partial_sum_min,
    read_samples,
    read_zero_offsets,
    z_deriv,
)
from .numkernel import LogMag, PrecReal, theta_prime, theta_prime_from_log
from .optim import phi_c_solution
from .psi import CoeffTable, coeff_table, e_bound, mean_sine_check

_SCENARIO_NOTE = (
    "asymptotic formulas evaluated with O(.) and o(.) error terms dropped"
)

# The first worked window: T and a chosen so the window holds 4 zeros and
# Z' is locally maximal at both edges.
TABLE1_T = "719342003522637.11248"
TABLE1_A = "0.38644"


# ---------------------------------------------------------------------------
# Heights


@dataclass(frozen=True)
class Height:
    """t = mantissa * 10^exp10 with the log computed symbolically."""

    exp10: int
    mantissa: float = 1.0

    def __post_init__(self):
        if not (1.0 <= self.mantissa < 10.0) and self.exp10 != 0:
            raise ContractError(
                f"Height mantissa must be in [1, 10), got {self.mantissa}"
            )
        if self.mantissa <= 0:
            raise ContractError("Height must be positive")

    def log_mpf(self, prec: int = 160):
        with workprec(prec):
            return mp.log(mpf(self.mantissa)) + self.exp10 * mp.log(10)

    def to_precreal(self, prec: int = 160) -> PrecReal:
        with workprec(prec):
            return PrecReal(mpf(self.mantissa) * mp.power(10, self.exp10), prec)

    def __str__(self):
        if self.mantissa == 1.0:
            return f"1e{self.exp10}"
        return f"{self.mantissa:g}e{self.exp10}"


def parse_height(text: str) -> Height:
    """'1e20000' or '7.19342e14' or a plain decimal -> Height."""
    s = text.strip().lower()
    try:
        if "e" in s:
            mant_s, exp_s = s.split("e", 1)
            mant = float(mant_s) if mant_s not in ("", "+", "-") else 1.0
            exp10 = int(exp_s)
        else:
            v = float(s)
            if v <= 0:
                raise ValueError
            exp10 = int(math.floor(math.log10(v)))
            mant = v / 10.0**exp10
        # normalize mantissa into [1, 10)
        while mant >= 10.0:
            mant /= 10.0
            exp10 += 1
        while 0 < mant < 1.0:
            mant *= 10.0
            exp10 -= 1
        return Height(exp10=exp10, mantissa=mant)
    except (ValueError, OverflowError) as exc:
        raise ContractError(f"cannot parse height {text!r}") from exc


def _log_t(t, prec: int = 160):
    """Natural log of a height given as Height, PrecReal, mpf or float."""
    if isinstance(t, Height):
        return t.log_mpf(prec)
    v = t.value if isinstance(t, PrecReal) else mpf(t)
    with workprec(prec):
        if not v > 1:
            raise ContractError("height must exceed 1")
        return mp.log(v)


# ---------------------------------------------------------------------------
# Growth models and peak conjectures


_VARIANTS = ("A1", "A2", "A3")
_PEAKS = ("FGH", "BS")


@dataclass(frozen=True)
class GrowthModel:
    """Which boundary-remainder growth shape to assume, how hard to push it
    (c), and which large-peak conjecture feeds the d-side."""

    variant: str
    c: float = 0.25
    peak_conjecture: str = "FGH"

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ContractError(f"variant must be one of {_VARIANTS}")
        if self.peak_conjecture not in _PEAKS:
            raise ContractError(f"peak_conjecture must be one of {_PEAKS}")
        if not (0.0 < self.c < 1.0):
            raise ContractError(f"c must be in (0, 1), got {self.c}")


def growth_value(model: Union[GrowthModel, str], t) -> PrecReal:
    """A_variant(t):  A1 = log t / (4 log_2 t),  A2 = sqrt(log t log_2 t) /
    (pi sqrt 2),  A3 = sqrt(log t / log_2 t).  Iterated logs are natural;
    requires t >= e^e so they are all defined."""
    variant = model.variant if isinstance(model, GrowthModel) else str(model)
    if variant not in _VARIANTS:
        raise ContractError(f"unknown growth variant {variant!r}")
    prec = 160
    lt = _log_t(t, prec)
    with workprec(prec):
        if lt < mp.e:
            raise ContractError("growth models need t >= e^e")
        l2 = mp.log(lt)
        if variant == "A1":
            v = lt / (4 * l2)
        elif variant == "A2":
            v = mp.sqrt(lt * l2) / (mp.pi * mp.sqrt(2))
        else:
            v = mp.sqrt(lt / l2)
        return PrecReal(+v, prec)


def window_half_width(t, prec: int = 160) -> float:
    """a = log_3 t / log_2 t, the window scale used by every scenario."""
    lt = _log_t(t, prec)
    with workprec(prec):
        l2 = mp.log(lt)
        if not l2 > 1:
            raise ContractError("window scale needs t > e^e")
        return float(mp.log(l2) / l2)


def peak_magnitude(conjecture: str, t) -> LogMag:
    """Conjectured peak size of |zeta| on the critical line at height t:
    FGH: exp sqrt((1/2) log t log_2 t); BS: exp sqrt(log t log_3 t / (2 log_2 t)).
    The (1 + o(1)) factors are dropped."""
    cj = conjecture.upper()
    if cj not in _PEAKS:
        raise ContractError(f"conjecture must be one of {_PEAKS}")
    prec = 160
    lt = _log_t(t, prec)
    with workprec(prec):
        if lt < mp.e:
            raise ContractError("peak magnitude needs t >= e^e")
        l2 = mp.log(lt)
        if cj == "FGH":
            expo = mp.sqrt(lt * l2 / 2)
        else:
            l3 = mp.log(l2)
            if l3 < 0:
                raise ContractError("BS peak needs t > e^(e^1) for log_3 t >= 0")
            expo = mp.sqrt(lt * l3 / (2 * l2))
        return LogMag(1, +(expo / mp.log(10)))


def d1_lower(peak: LogMag, M_plus) -> LogMag:
    """peak / (2 pi M_plus): the first scaled derivative is at least the
    nearby peak over the maximal zero-to-peak distance."""
    mv = float(M_plus.value if isinstance(M_plus, PrecReal) else M_plus)
    if not mv > 0:
        raise ContractError("d1_lower requires M_plus > 0")
    with workprec(160):
        denom = LogMag.from_real(2 * mp.pi * mpf(mv), 160)
    return peak / denom


# ---------------------------------------------------------------------------
# Scenario


@dataclass(frozen=True)
class ScenarioReport:
    """All scenario-level bounds for one (T, c, model) choice."""

    T: str
    a: float
    c: float
    variant: str
    peak_conjecture: str
    K: int
    n: int
    M_plus: PrecReal
    beta1_lower: LogMag
    d1_lower: LogMag
    e_bound: LogMag
    product: LogMag
    solution_J: int
    solution_L: int
    solution_plateau: float
    note: str = _SCENARIO_NOTE

    def json_dict(self) -> dict:
        def lm(x: LogMag) -> dict:
            return {
                "sign": x.sign,
                "log10": mp.nstr(x.log10, 25) if x.sign else "0",
                "sci": x.sci(10),
            }

        return {
            "T": self.T,
            "a": self.a,
            "c": self.c,
            "variant": self.variant,
            "peak_conjecture": self.peak_conjecture,
            "K": self.K,
            "n": self.n,
            "M_plus": self.M_plus.to_decimal(),
            "beta1_lower": lm(self.beta1_lower),
            "d1_lower": lm(self.d1_lower),
            "e_bound": lm(self.e_bound),
            "product": lm(self.product),
            "solution": {
                "J": self.solution_J,
                "L": self.solution_L,
                "plateau": self.solution_plateau,
            },
            "note": self.note,
        }

    def json_text(self) -> str:
        return json.dumps(self.json_dict(), sort_keys=True, indent=2) + "\n"

    def csv_text(self) -> str:
        head = "T,a,c,variant,peak,K,n,M_plus,beta1_lower,d1_lower,e_bound,product"
        row = ",".join(
            [
                self.T,
                "%.6g" % self.a,
                "%.6g" % self.c,
                self.variant,
                self.peak_conjecture,
                str(self.K),
                str(self.n),
                "%.6g" % float(self.M_plus),
                self.beta1_lower.sci(6),
                self.d1_lower.sci(6),
                self.e_bound.sci(6),
                self.product.sci(6),
            ]
        )
        return head + "\n" + row + "\n"

    def text_table(self) -> str:
        rows = [
            ("T", self.T),
            ("a", "%.6f" % self.a),
            ("c", "%.6g" % self.c),
            ("model", f"{self.variant}+{self.peak_conjecture}"),
            ("K", str(self.K)),
            ("n", str(self.n)),
            ("M_plus", "%.6f" % float(self.M_plus)),
            ("beta1_lower", self.beta1_lower.sci(6)),
            ("d1_lower", self.d1_lower.sci(6)),
            ("e_bound", self.e_bound.sci(6)),
            ("beta1*d1", self.product.sci(6)),
        ]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows) + "\n"


def run_scenario(T, c: float, model: GrowthModel) -> ScenarioReport:
    """Assemble every scenario bound at height T for push strength c:
    window scale a, growth magnitude M_plus at T (the +a shift is far below
    working precision at these heights), the structured-solution lower
    bound for beta_1^+, the conjectured d_1^+ floor, the derivative-tail
    bound e_{2K,n} with K = floor((7/8) theta'(T)), and the product."""
    if isinstance(T, str):
        T = parse_height(T)
    prec = 200
    lt = _log_t(T, prec)
    a = window_half_width(T, prec)
    M = growth_value(model, T)
    with workprec(prec):
        tp = theta_prime_from_log(lt, prec)
        K = int(mp.floor(mpf(7) / 8 * tp))
    Tp = T.to_precreal(prec) if isinstance(T, Height) else (
        T if isinstance(T, PrecReal) else PrecReal(mpf(T), prec)
    )
    beta, sol, prob = phi_c_solution(Tp, a, M, c)
    peak = peak_magnitude(model.peak_conjecture, T)
    d1 = d1_lower(peak, M)
    e = e_bound(K, prob.n, Tp, PrecReal.from_float(a, prec))
    return ScenarioReport(
        T=str(T),
        a=a,
        c=c,
        variant=model.variant,
        peak_conjecture=model.peak_conjecture,
        K=K,
        n=prob.n,
        M_plus=M,
        beta1_lower=beta,
        d1_lower=d1,
        e_bound=e,
        product=beta * d1,
        solution_J=sol.J,
        solution_L=sol.L,
        solution_plateau=sol.plateau,
    )


# ---------------------------------------------------------------------------
# Window runs


def _window_report(win: Window, table: CoeffTable, extras: dict) -> dict:
    ns = win.node_set()
    rec = mean_sine_check(win)
    out = {
        "T": win.T.to_decimal(),
        "a": float(win.a),
        "n": win.n,
        "offsets": [x.to_decimal() for x in win.offsets()],
        "zprime_max_at_edges": list(win.zprime_max_at_edges),
        "e_bound_log10": float(table.e_bound.log10),
        "e_bound": table.e_bound.sci(10),
        "lhs": table.lhs.to_decimal(),
        "lhs_over_bound": table.ratio,
        "mean_sine": {
            "sum_sin": float(rec.sum_sin),
            "delta_s_window": float(rec.delta_s_window),
            "count": rec.count,
            "expected_count": float(rec.expected_count),
        },
        "node_count": ns.n + 1,
    }
    if win.t_peak is not None:
        out["t_peak_minus_T"] = float(win.t_peak - win.T)
        out["z_peak"] = float(win.z_peak)
    out.update(extras)
    return out


def run_table1(
    workers: int = 1,
    t_text: str = TABLE1_T,
    a_text: str = TABLE1_A,
    K: Optional[int] = None,
) -> tuple:
    """The first worked example end to end: build the window at the
    hard-coded (T, a), evaluate the odd derivatives at the edges, and emit
    the coefficient table plus a window report.  K defaults to
    ceil(theta'(T)/4) (= 5 here)."""
    prec = 200
    T = PrecReal.from_decimal(t_text, prec)
    a = PrecReal.from_decimal(a_text, prec)
    if K is None:
        K = int(mp.ceil(theta_prime(T.value) / 4))
    cfg = ZEvalConfig(t=T, workers=workers, span=float(a.value) + 2.0)
    win = build_window(T, a, cfg)
    derivs_p = []
    derivs_m = []
    with workprec(prec):
        t_hi = PrecReal(T.value + a.value, prec)
        t_lo = PrecReal(T.value - a.value, prec)
    for k in range(1, K + 1):
        derivs_p.append(z_deriv(t_hi, 2 * k - 1, cfg))
        derivs_m.append(z_deriv(t_lo, 2 * k - 1, cfg))
    table = coeff_table(win, K, derivs_p, derivs_m)
    psum = partial_sum_min(t_hi, cfg)
    report = _window_report(
        win,
        table,
        {"partial_sum_min_at_upper_edge": float(psum), "K": K},
    )
    return table, report


def run_table2(
    zero_file: str,
    sample_file: Optional[str] = None,
    a_text: Optional[str] = None,
    K: Optional[int] = None,
    fd_extra: int = 4,
) -> tuple:
    """Coefficient table for an ingested window (heights far beyond direct
    summation).  Zeros come from the offset file; derivative data, if a
    sample file is given, from polynomial finite differences.  Returns
    (table_or_None, report): without samples only the beta side is
    computable and the table slot is None."""
    T, offsets = read_zero_offsets(zero_file)
    prec = max(T.prec, 200)
    if a_text is not None:
        a = PrecReal.from_decimal(a_text, prec)
    else:
        amax = max(abs(float(o)) for o in offsets)
        a = PrecReal.from_float(amax * 1.05, prec)
    with workprec(prec):
        zeros = tuple(PrecReal(T.value + o.value, prec) for o in offsets)
    win = Window(T=T, a=a, zeros=zeros)
    if K is None:
        K = int(mp.ceil(theta_prime(T.value) / 4))
    if sample_file is None:
        # beta side only
        from .psi import psi  # local import to keep module init light

        ns = win.node_set()
        with workprec(prec):
            tp = theta_prime(T.value, prec)
        beta_p, beta_m = [], []
        for k in range(1, K + 1):
            sgn = -1 if k % 2 == 0 else 1
            tpk = tp ** (2 * k - 1)
            beta_p.append(PrecReal(sgn * psi(k, ns, ns.a).value * tpk, prec))
            beta_m.append(PrecReal(sgn * (-psi(k, ns, -ns.a).value) * tpk, prec))
        report = {
            "T": T.to_decimal(),
            "a": float(a),
            "n": win.n,
            "K": K,
            "beta_plus": [b.to_decimal() for b in beta_p],
            "beta_minus": [b.to_decimal() for b in beta_m],
            "d_columns": "unavailable (no sample file)",
        }
        return None, report
    samples = read_samples(sample_file)
    orders = [2 * k - 1 for k in range(1, K + 1)]
    with workprec(prec):
        d_hi = fd_derivatives(samples, a.value, orders, extra=fd_extra, prec=prec)
        d_lo = fd_derivatives(samples, -a.value, orders, extra=fd_extra, prec=prec)
    derivs_p = [d_hi[o] for o in orders]
    derivs_m = [d_lo[o] for o in orders]
    table = coeff_table(win, K, derivs_p, derivs_m)
    report = _window_report(win, table, {"K": K, "fd_extra": fd_extra})
    return table, report


def run_deltaS(T, a, workers: int = 1) -> dict:
    """Desk-scale diagnostic: zero count vs the mean-count increment across
    [T - a, T + a], plus the edge-offset sine sum."""
    prec = 200
    Tp = T if isinstance(T, PrecReal) else PrecReal.from_float(float(T), prec)
    ap = a if isinstance(a, PrecReal) else PrecReal.from_float(float(a), prec)
    cfg = ZEvalConfig(t=Tp, workers=workers, span=float(ap.value) + 1.0)
    zeros = find_zeros(Tp, ap, cfg)
    count = len(zeros)
    mean = expected_zero_count(Tp.value, ap.value)
    with workprec(prec):
        s = mpf(0)
        for z in zeros:
            s += mp.sin(mp.pi * (z.value - Tp.value) / (2 * ap.value))
    return {
        "T": Tp.to_decimal(),
        "a": float(ap),
        "count": count,
        "n_is_odd": (count % 2 == 0 and count > 0),
        "expected_count": mean,
        "delta_s_window": count - mean,
        "sum_sin": float(s),
        "offsets": [float(z.value - Tp.value) for z in zeros],
    }


# ---------------------------------------------------------------------------
# Config files


def load_config(path: str) -> dict:
    """Flat key=value config; '#' comments and blank lines ignored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IngestError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for ln_no, raw in enumerate(lines, 1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise IngestError(f"{path}:{ln_no}: expected key=value")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out
