"""q-integers, Gaussian binomials, Jackson integrals and the q-operator.

The q-operator is

    L_q(f, x) = [n+p]_q * sum_k b_k(x; q) * int_0^{inf/A(1-q)} f(t) s_k(t; q) d_q t

with b_k(x; q) = [n+p+k-1 choose k]_q q^(k^2) x^k / (1+x)_q^(n+p+k) and the
q-Gamma kernel s_k(t; q) = e_q(-[n+p]_q t) ([n+p]_q t)^k / [k]_q!, where
e_q(-z) = prod_{i>=0} 1/(1 + (1-q) q^i z).  The improper Jackson integral
runs over the nodes q^j / (A(1-q)), j in Z.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .funcparse import FuncExpr
from .numerics import SeriesPolicy, TruncationWarning
from .operators import MomentReport

__all__ = [
    "JacksonResult",
    "NonDecayingIntegrandError",
    "QContext",
    "QOperatorSpec",
    "jackson_integral",
    "jackson_improper_integral",
    "q_binomial",
    "q_closed_moments",
    "q_evaluate",
    "q_integer",
    "q_moments",
    "q_pochhammer_1px",
]

_UNDERFLOW = -745.0


class NonDecayingIntegrandError(ValueError):
    pass


@dataclass(frozen=True)
class QContext:
    """Parameters of the improper Jackson integral.

    ``j_min``/``j_max`` give the starting node window; it is widened until
    the edge terms fall below ``rel_tol`` of the running sum or
    ``max_nodes`` is reached.
    """

    q: float
    A: float = 1.0
    j_min: int = -64
    j_max: int = 64
    rel_tol: float = 1e-14
    max_nodes: int = 4_000_000

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if not self.j_min <= 0 <= self.j_max:
            raise ValueError("need j_min <= 0 <= j_max")


@dataclass(frozen=True)
class QOperatorSpec:
    n: int
    p: int
    ctx: QContext

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError(f"n and p must be positive integers, got n={self.n}, p={self.p}")

    @property
    def q(self) -> float:
        return self.ctx.q

    @property
    def r(self) -> int:
        return self.n + self.p


@dataclass
class JacksonResult:
    value: float
    j_lo: int
    j_hi: int
    reason: str


# ---------------------------------------------------------------------------
# q-arithmetic

def q_integer(n, q: float):
    """[n]_q = (1 - q^n)/(1 - q); equals n at q = 1."""
    if q == 1:
        return n * 1.0
    if isinstance(n, np.ndarray):
        return -np.expm1(n * math.log(q)) / (1.0 - q)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return -math.expm1(n * math.log(q)) / (1.0 - q)


def _log_q_integers(m: np.ndarray, q: float) -> np.ndarray:
    """log [m]_q for an array of positive integers."""
    if q == 1:
        return np.log(m.astype(float))
    return np.log(-np.expm1(m * math.log(q))) - math.log1p(-q)


def log_q_factorials(kmax: int, q: float) -> np.ndarray:
    """log [k]_q! for k = 0..kmax."""
    out = np.zeros(kmax + 1)
    if kmax > 0:
        out[1:] = np.cumsum(_log_q_integers(np.arange(1, kmax + 1), q))
    return out


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial coefficient [n choose k]_q (log-space product)."""
    if not 0 <= k <= n:
        raise ValueError(f"q_binomial needs 0 <= k <= n, got n={n}, k={k}")
    if q == 1:
        return float(round(math.exp(math.lgamma(n + 1) - math.lgamma(k + 1)
                                    - math.lgamma(n - k + 1))))
    k = min(k, n - k)
    if k == 0:
        return 1.0
    i = np.arange(1, k + 1)
    num = _log_q_integers(n - k + i, q)
    den = _log_q_integers(i, q)
    return math.exp(float(np.sum(num) - np.sum(den)))


class _PochhammerCache:
    """Cumulative log prod_{j<m} (1 + q^j x), extended on demand per (x, q)."""

    def __init__(self, maxsize: int = 256):
        self._data: OrderedDict[tuple[float, float], np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def logs(self, x: float, q: float, m: int) -> np.ndarray:
        key = (float(x), float(q))
        with self._lock:
            arr = self._data.get(key)
            if arr is not None and len(arr) > m:
                self._data.move_to_end(key)
                return arr
            start = 0 if arr is None else len(arr) - 1
            target = max(m + 1, 2 * (len(arr) if arr is not None else 16))
            j = np.arange(start, target - 1)
            inc = np.log1p(np.power(q, j) * x)
            base = 0.0 if arr is None else arr[-1]
            ext = base + np.cumsum(inc)
            arr = np.concatenate([[0.0] if arr is None else arr, ext])
            self._data[key] = arr
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
            return arr


_POCH = _PochhammerCache()


def log_q_pochhammer_1px(x: float, m: int, q: float) -> float:
    if q == 1:
        return m * math.log1p(x)
    return float(_POCH.logs(x, q, m)[m])


def q_pochhammer_1px(x: float, m: int, q: float) -> float:
    """(1+x)_q^m = prod_{j=0}^{m-1} (1 + q^j x)."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return math.exp(log_q_pochhammer_1px(x, m, q))


# ---------------------------------------------------------------------------
# Jackson integrals

def jackson_integral(g: Callable, b: float, q: float, rel_tol: float = 1e-15,
                     max_terms: int = 10_000_000) -> float:
    """Definite Jackson integral over [0, b]: (1-q) b sum_j q^j g(b q^j)."""
    total = 0.0
    j0 = 0
    block = 1024
    while j0 < max_terms:
        t = b * np.power(q, np.arange(j0, j0 + block, dtype=float))
        terms = (1 - q) * t * np.asarray(g(t), dtype=float)
        total += float(np.sum(terms))
        j0 += block
        if abs(terms[-1]) / (1 - q) <= rel_tol * abs(total) or not np.any(terms):
            return total
    warnings.warn("definite Jackson sum hit max_terms", TruncationWarning, stacklevel=2)
    return total


def _widen(eval_terms, q: float, rel_tol: float, lo: int, hi: int, max_nodes: int,
           t_of_j) -> tuple[np.ndarray, int, int, str]:
    """Grow [lo, hi] until both edges of the node sum are negligible.

    ``eval_terms(lo, hi)`` returns the terms for j = lo..hi.  Large j are
    small nodes (tail ~ geometric, ratio q); small j are large nodes where
    the integrand must decay.
    """
    edge = max(20, int(math.ceil(1.0 / -math.log(q))))
    while True:
        terms = eval_terms(lo, hi)
        if not np.all(np.isfinite(terms)):
            raise NonDecayingIntegrandError(
                f"Jackson terms overflow on node window j in [{lo}, {hi}]")
        total = float(np.sum(terms))
        scale = abs(total)
        small_ok = abs(terms[-1]) * q / (1 - q) <= rel_tol * scale
        head = np.abs(terms[:edge])
        large_ok = head.max(initial=0.0) <= rel_tol * scale * (1 - q) and \
            (len(head) < 2 or head[0] <= head[-1])
        if small_ok and large_ok:
            return terms, lo, hi, "tolerance"
        width = hi - lo + 1
        if width >= max_nodes:
            warnings.warn(f"Jackson node window capped at {width} nodes", TruncationWarning,
                          stacklevel=3)
            return terms, lo, hi, "max_nodes"
        at_top = t_of_j(lo) > 1e250
        at_bottom = t_of_j(hi) < 1e-250
        if not large_ok and at_top:
            growing = np.all(np.diff(np.abs(terms[:21])) < 0) if len(terms) > 21 else False
            if growing:
                raise NonDecayingIntegrandError(
                    "integrand does not decay at large t: terms grow over the last 20 "
                    f"nodes near t = {t_of_j(lo):.3g}")
            return terms, lo, hi, "node_range"
        grow = max(width // 2, edge)
        if not small_ok and not at_bottom:
            hi += grow
        if not large_ok and not at_top:
            lo -= grow
        if (small_ok or at_bottom) and (large_ok or at_top):
            return terms, lo, hi, "node_range"


def jackson_improper_integral(g: Callable, ctx: QContext, scale: float | None = None,
                              full_output: bool = False):
    """(1-q) sum_{j in Z} (q^j/s) g(q^j/s) with s = ``scale`` (default ctx.A)."""
    q = ctx.q
    s = ctx.A if scale is None else scale
    log_q = math.log(q)

    def t_of_j(j):
        return math.exp(j * log_q - math.log(s))

    def eval_terms(lo, hi):
        t = np.exp(np.arange(lo, hi + 1) * log_q - math.log(s))
        with np.errstate(all="ignore"):
            vals = np.asarray(g(t), dtype=float)
        return (1 - q) * t * vals

    terms, lo, hi, reason = _widen(eval_terms, q, ctx.rel_tol, ctx.j_min, ctx.j_max,
                                   ctx.max_nodes, t_of_j)
    value = float(math.fsum(terms)) if len(terms) < 200_000 else float(np.sum(terms))
    if full_output:
        return JacksonResult(value, lo, hi, reason)
    return value


# ---------------------------------------------------------------------------
# the q-operator

def _log1p_geometric_sum(z: float, q: float) -> float:
    """sum_{i>=0} log(1 + z q^i) for 0 <= z <= 1/2."""
    if z == 0:
        return 0.0
    total = 0.0
    zm = 1.0
    for m in range(1, 200):
        zm *= z
        term = zm / (m * -math.expm1(m * math.log(q)))
        total += term if m % 2 else -term
        if term < 1e-18 * abs(total):
            break
    return total


def _log_basis_weights(spec: QOperatorSpec, x: float, policy: SeriesPolicy,
                       extra_degree: float = 0.0):
    """log b_k(x; q) and log [k]_q! for the k-window that carries the mass.

    The window is cut where the probability weight b_k q^{-k(k+1)/2}
    (times a polynomial allowance ((k+1)/[n+p]_q + 1)^degree) falls below
    rel_tol * 1e-4 of its peak past the mode.
    """
    q, r = spec.q, spec.r
    if x == 0:
        return np.array([0.0]), np.array([0.0]), "x=0"
    log_q = math.log(q)
    nq = q_integer(r, q)
    kmax = 64
    while True:
        k = np.arange(0, kmax + 1)
        kk = k[:-1]
        inc = (_log_q_integers(r + kk, q) - _log_q_integers(kk + 1, q)
               + (2 * kk + 1) * log_q + math.log(x) - np.log1p(np.power(q, r + kk) * x))
        lb = np.concatenate([[-log_q_pochhammer_1px(x, r, q)], -log_q_pochhammer_1px(x, r, q)
                             + np.cumsum(inc)])
        lw = lb - 0.5 * k * (k + 1) * log_q
        lw_eff = lw + extra_degree * np.log1p((k + 1) / nq)
        peak = int(np.argmax(lw_eff))
        cutoff = lw_eff[peak] + math.log(policy.rel_tol) + math.log(1e-4)
        tail = lw_eff[peak:] < cutoff
        if np.any(tail) and peak < kmax:
            last = peak + int(np.argmax(tail))
            lb = lb[: last + 1]
            return lb, log_q_factorials(last, q), "tolerance"
        if kmax >= policy.k_max:
            warnings.warn(f"q-basis window hit k_max={policy.k_max}", TruncationWarning,
                          stacklevel=3)
            return lb, log_q_factorials(kmax, q), "k_max"
        kmax = min(2 * kmax, policy.k_max)


def _degree(f: FuncExpr) -> float:
    if f.poly is not None:
        return float(len(f.poly) - 1)
    if f.growth.kind == "poly":
        return f.growth.degree
    return 0.0


def _q_evaluate_jackson(spec: QOperatorSpec, f: FuncExpr, x: float,
                        policy: SeriesPolicy) -> float:
    ctx = spec.ctx
    q = ctx.q
    log_q = math.log(q)
    nq = q_integer(spec.r, q)
    s = ctx.A * (1 - q)  # nodes q^j / (A (1 - q))
    c = nq / ctx.A  # (1-q) [n+p]_q t_j = c q^j
    lb, lfact, _ = _log_basis_weights(spec, x, policy, _degree(f))
    ks = np.arange(len(lb))
    coef = lb - lfact  # log b_k - log [k]_q!

    def t_of_j(j):
        return math.exp(j * log_q - math.log(s))

    # small-node edge must satisfy c q^j <= 1/2 for the tail series
    j_floor = int(math.ceil(math.log(0.5 / c) / log_q)) + 1 if c > 0.5 else 0
    # centre the starting window on the kernel mass, t ~ (E[k] + 1) / [n+p]_q
    w = np.exp(lb - lb.max())
    t_mid = (float(np.dot(w, ks)) / float(w.sum()) + 1.0) / nq
    j_mid = int(round((math.log(t_mid) + math.log(s)) / log_q))
    spread = 4 * int(math.ceil(1.0 / -log_q))
    lo0 = min(ctx.j_min, j_mid - spread)
    hi0 = max(ctx.j_max, j_floor, j_mid + spread)

    def eval_terms(lo, hi):
        j = np.arange(lo, hi + 1)
        log_t = j * log_q - math.log(s)
        # Lambda(j) = sum_{i >= j} log1p(c q^i), accumulated from the top
        inc = np.log1p(c * np.exp(j * log_q))
        lam = np.cumsum(inc[::-1])[::-1] + _log1p_geometric_sum(c * q ** (hi + 1), q)
        ell = math.log(nq) + log_t
        out = np.empty(len(j))
        chunk = max(1, 2_000_000 // max(len(ks), 1))
        for a in range(0, len(j), chunk):
            sl = slice(a, a + chunk)
            logk = logsumexp(coef[:, None] + ks[:, None] * ell[None, sl], axis=0)
            out[sl] = np.exp(math.log1p(-q) + log_t[sl] + math.log(nq) + logk - lam[sl])
        with np.errstate(all="ignore"):
            vals = np.asarray(f(np.exp(log_t)), dtype=float)
        return out * vals

    terms, lo, hi, reason = _widen(eval_terms, q, ctx.rel_tol, lo0, hi0, ctx.max_nodes, t_of_j)
    return float(np.sum(terms))


def _q_evaluate_monomial(spec: QOperatorSpec, f: FuncExpr, x: float,
                         policy: SeriesPolicy) -> float:
    # [n+p]_q int t^m s_k d_q t = [k+1]_q ... [k+m]_q / [n+p]_q^m * q^{-(k+m)(k+m+1)/2}
    q = spec.q
    log_q = math.log(q)
    nq = q_integer(spec.r, q)
    coeffs = f.poly
    deg = len(coeffs) - 1
    lb, _, _ = _log_basis_weights(spec, x, policy, float(deg))
    k = np.arange(len(lb), dtype=float)
    total = 0.0
    for m, cm in enumerate(coeffs):
        if cm == 0:
            continue
        rising = np.zeros_like(k)
        for i in range(1, m + 1):
            rising += _log_q_integers(k + i, q)
        logs = lb + rising - m * math.log(nq) - 0.5 * (k + m) * (k + m + 1) * log_q
        total += cm * math.fsum(np.exp(logs))
    return total


def q_evaluate(spec: QOperatorSpec, f: FuncExpr, x: float,
               policy: SeriesPolicy = SeriesPolicy(), method: str = "jackson") -> float:
    """Value of the q-operator applied to ``f`` at ``x``.

    ``method="jackson"`` sums the improper Jackson integral node by node;
    ``"monomial"`` integrates polynomial f exactly through the q-Gamma
    moments and only sums the k-series; ``"auto"`` picks monomial when f is
    a polynomial.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if method == "auto":
        method = "monomial" if f.poly is not None else "jackson"
    if method == "monomial":
        if f.poly is None:
            raise ValueError("monomial route needs a polynomial f")
        return _q_evaluate_monomial(spec, f, x, policy)
    if method != "jackson":
        raise ValueError(f"unknown method {method!r}")
    return _q_evaluate_jackson(spec, f, x, policy)


def q_closed_moments(n: int, p: int, q: float, x):
    """(e0, e1, e2, alpha, delta, bound) from the q-moment formulas."""
    nq = q_integer(n + p, q)
    nq1 = q_integer(n + p + 1, q)
    e1 = x / q**2 + 1.0 / (q * nq)
    e2 = (nq1 / (q**6 * nq) * x * x + (1 + 2 * q + q * q) / (q**5 * nq) * x
          + (1 + q) / (q**3 * nq * nq))
    alpha = (1 - 1 / q**2) * x + 1.0 / (q * nq)
    delta = e2 - 2 * x * e1 + x * x
    bound = 9.0 / q**6 * (1 - q**3 + 1.0 / nq) * (x + 1) ** 2
    return 1.0, e1, e2, alpha, delta, bound


def q_moments(spec: QOperatorSpec, x: float, numeric: bool = True,
              policy: SeriesPolicy = SeriesPolicy(), method: str = "jackson") -> MomentReport:
    """Closed-form q-moments with numeric counterparts and the central-moment bound."""
    from .funcparse import catalog

    e0, e1, e2, alpha, delta, bound = q_closed_moments(spec.n, spec.p, spec.q, x)
    report = MomentReport("q", float(x), e0, e1, e2, alpha, delta,
                          extras={"q": spec.q, "delta_bound": bound,
                                  "bound_holds": bool(delta <= bound)})
    if numeric:
        report.numeric_e0, report.numeric_e1, report.numeric_e2 = (
            q_evaluate(spec, catalog(name), x, policy, method) for name in ("e0", "e1", "e2"))
        report.fill_discrepancy()
    return report
