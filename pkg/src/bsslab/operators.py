"""Baskakov-Schurer-Szasz operators: classical, Stancu and King-modified.

For a target f and a point x the classical operator is

    L(f, x) = (n+p) * sum_k b_k(x) * int_0^inf f(t) s_k(t) dt,

with negative-binomial weights b_k(x) = C(n+p+k-1, k) x^k / (1+x)^(n+p+k)
and Gamma kernels s_k(t) = exp(-(n+p)t) ((n+p)t)^k / k!.  After u = (n+p)t
the k-th integral is a Gamma(k+1) expectation, evaluated with a generalized
Gauss-Laguerre rule of parameter k.  The Stancu variant composes f with
t -> (nt + alpha)/(n + beta); the King variant additionally moves the
evaluation point to r_n(x) so that linear functions are reproduced.
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .funcparse import FuncExpr
from .numerics import (
    EvalPolicy,
    TruncationWarning,
    laguerre_block,
    log_negbin_weights,
    sum_series,
)

__all__ = [
    "DomainError",
    "MomentReport",
    "OperatorSpec",
    "Variant",
    "classical_central_moments",
    "closed_moments",
    "evaluate",
    "evaluate_grid",
    "king_domain_start",
    "king_transform",
    "paper_king_moments",
    "stancu_moments",
]

_UNDERFLOW = -745.0  # exp() of anything below is exactly 0.0


class DomainError(ValueError):
    pass


class Variant(str, enum.Enum):
    CLASSICAL = "classical"
    STANCU = "stancu"
    KING = "king"


@dataclass(frozen=True)
class OperatorSpec:
    variant: Variant = Variant.CLASSICAL
    n: int = 1
    p: int = 1
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n < 1 or self.p < 1:
            raise ValueError(f"n and p must be positive integers, got n={self.n}, p={self.p}")
        if self.variant is Variant.CLASSICAL:
            if self.alpha != 0 or self.beta != 0:
                raise ValueError("classical operator takes no alpha/beta (must be 0)")
        elif not 0 <= self.alpha <= self.beta:
            raise ValueError(f"need 0 <= alpha <= beta, got alpha={self.alpha}, beta={self.beta}")

    @property
    def r(self) -> int:
        return self.n + self.p

    def with_n(self, n: int) -> "OperatorSpec":
        return OperatorSpec(self.variant, n, self.p, self.alpha, self.beta)


@dataclass
class MomentReport:
    """Closed-form moments next to their quadrature-evaluated counterparts."""

    variant: str
    x: float
    e0: float
    e1: float
    e2: float
    m1: float
    m2: float
    numeric_e0: float = math.nan
    numeric_e1: float = math.nan
    numeric_e2: float = math.nan
    max_rel_discrepancy: float = math.nan
    extras: dict = field(default_factory=dict)

    def fill_discrepancy(self) -> float:
        rel = []
        for closed, num in ((self.e0, self.numeric_e0), (self.e1, self.numeric_e1),
                            (self.e2, self.numeric_e2)):
            rel.append(abs(num - closed) / max(abs(closed), 1e-300))
        self.max_rel_discrepancy = max(rel)
        return self.max_rel_discrepancy

    def as_row(self) -> dict:
        row = {k: getattr(self, k) for k in (
            "variant", "x", "e0", "e1", "e2", "m1", "m2",
            "numeric_e0", "numeric_e1", "numeric_e2", "max_rel_discrepancy")}
        row.update(self.extras)
        return row


# ---------------------------------------------------------------------------
# closed forms

def classical_central_moments(n: int, p: int, x):
    """(alpha_n(x), delta_n(x)): first and second central moments."""
    r = n + p
    return 1.0 / r + 0.0 * x, x * x / r + 2.0 * x / r + 2.0 / r**2


def _classical_raw(n, p, x):
    r = n + p
    return 1.0, x + 1.0 / r, (1.0 + 1.0 / r) * x * x + 4.0 * x / r + 2.0 / r**2


def stancu_moments(n: int, p: int, alpha: float, beta: float, x):
    """(e0, e1, e2, mu1, mu2) of the Stancu operator at x."""
    r = n + p
    nb = n + beta
    e1 = ((n * x + alpha) * r + n) / (r * nb)
    e2 = (n * n * (r + 1) / (r * nb**2) * x * x
          + (4 * n * n + 2 * n * alpha * r) / (r * nb**2) * x
          + (2 * n * n + 2 * n * alpha * r + alpha**2 * r**2) / (r**2 * nb**2))
    mu1 = (n * (1 + alpha) + alpha * p - beta * x * r) / (r * nb)
    mu2 = ((n * n + beta**2 * r) / (r * nb**2) * x * x
           + (2 * n * n - 2 * n * beta * (1 + alpha) - 2 * alpha * p * beta) / (r * nb**2) * x
           + (2 * n * n + 2 * n * alpha * r + alpha**2 * r**2) / (nb**2 * r**2))
    return 1.0, e1, e2, mu1, mu2


def king_domain_start(spec: OperatorSpec) -> float:
    """Left end of I_n, the interval on which the King operator is defined."""
    n, r = spec.n, spec.r
    return (n + spec.alpha * r) / ((n + spec.beta) * r)


def king_transform(spec: OperatorSpec, x: float) -> float:
    """r_n(x) = ((n+beta)x - alpha)/n - 1/(n+p), clamped to 0 at the left end of I_n."""
    lo = king_domain_start(spec)
    if x < lo and not math.isclose(x, lo, rel_tol=1e-14, abs_tol=1e-300):
        raise DomainError(
            f"King operator needs x in I_n = [{lo!r}, inf) for n={spec.n}, p={spec.p}, "
            f"alpha={spec.alpha}, beta={spec.beta}; got x={x!r}"
        )
    y = ((spec.n + spec.beta) * x - spec.alpha) / spec.n - 1.0 / spec.r
    return max(y, 0.0)


def king_moments(spec: OperatorSpec, x: float):
    """(e0, e1, e2, mu1, mu2) of the King operator, from Stancu moments at r_n(x)."""
    y = king_transform(spec, x)
    _, _, e2, _, _ = stancu_moments(spec.n, spec.p, spec.alpha, spec.beta, y)
    return 1.0, x, e2, 0.0, e2 - x * x


def paper_king_moments(spec: OperatorSpec, x: float):
    """Second moment and second central moment as printed for the King operator.

    Kept for side-by-side reporting only: the x**2 coefficient does not tend
    to 1 as n grows, so these values disagree with the operator itself.
    """
    n, r, a, nb = spec.n, spec.r, spec.alpha, spec.n + spec.beta
    c2 = (n * n * (2 * r + 1) + r * nb**2) / (r * nb**2)
    c1 = (6 * n * n + 4 * n * a * r) / (r * nb**2)
    c0 = (3 * n * n + 4 * n * a * r + 2 * a * a * r * r) / (r * r * nb**2)
    e2 = c2 * x * x + c1 * x + c0
    m2 = (n * n * (2 * r + 1)) / (r * nb**2) * x * x + c1 * x + c0
    return e2, m2


def closed_form(spec: OperatorSpec, x: float):
    if spec.variant is Variant.CLASSICAL:
        e0, e1, e2 = _classical_raw(spec.n, spec.p, x)
        m1, m2 = classical_central_moments(spec.n, spec.p, x)
        return e0, e1, e2, m1, m2
    if spec.variant is Variant.STANCU:
        return stancu_moments(spec.n, spec.p, spec.alpha, spec.beta, x)
    return king_moments(spec, x)


# ---------------------------------------------------------------------------
# evaluation

def _argument(spec: OperatorSpec, x: float) -> float:
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    if spec.variant is Variant.KING:
        return king_transform(spec, x)
    return float(x)


def _k_start(r: int, y: float) -> int:
    """First k whose weight b_k(y) does not underflow to zero."""
    if y == 0:
        return 0
    mean = r * y
    sd = math.sqrt(r * y * (1 + y))
    lo = max(0, int(mean - 60 * sd - 50))
    ks = np.arange(lo, int(mean) + 1)
    lw = log_negbin_weights(r, y, ks)
    above = np.nonzero(lw > _UNDERFLOW)[0]
    return int(ks[above[0]]) if len(above) else int(mean)


def _series_at_order(spec, f, y, order, policy, block=256):
    r = spec.r
    n, a, nb = spec.n, spec.alpha, spec.n + spec.beta
    stancu = spec.variant is not Variant.CLASSICAL
    abs_total = [0.0]

    def integrals(ks):
        nodes, weights = laguerre_block(order, ks)
        t = nodes / r
        if stancu:
            t = (n * t + a) / nb
        vals = f(t)
        return np.einsum("ij,ij->i", weights, vals), np.einsum("ij,ij->i", weights, np.abs(vals))

    if y == 0:
        signed, absolute = integrals(np.array([0]))
        return float(signed[0]), float(absolute[0]), "x=0", True

    def terms(ks):
        lw = log_negbin_weights(r, y, ks)
        w = np.exp(lw)
        live = lw > _UNDERFLOW
        out = np.zeros(len(ks))
        if np.any(live):
            signed, absolute = integrals(ks[live])
            out[live] = w[live] * signed
            abs_total[0] += float(np.dot(w[live], absolute))
        return out

    res = sum_series(terms, policy.series, start=_k_start(r, y), block=block)
    return res.value, abs_total[0], res.reason, res.converged


def evaluate(spec: OperatorSpec, f: FuncExpr, x: float, policy: EvalPolicy = EvalPolicy()) -> float:
    """Value of the operator ``spec`` applied to ``f`` at ``x``.

    Gauss-Laguerre order starts at ``policy.quad_order`` and doubles while
    successive orders disagree; polynomial f of degree <= 2*order-1 is
    integrated exactly and skips the doubling.  Truncation problems are
    reported through :class:`TruncationWarning`.
    """
    y = _argument(spec, x)
    order = policy.quad_order
    value, scale, reason, converged = _series_at_order(spec, f, y, order, policy)
    if not converged:
        warnings.warn(f"k-series truncated at x={x} ({reason})", TruncationWarning, stacklevel=2)
    if f.poly is not None and len(f.poly) - 1 <= 2 * order - 1:
        return value
    while True:
        if order * 2 > policy.max_quad_order:
            warnings.warn(
                f"Gauss-Laguerre orders did not settle to {policy.quad_rel_tol:g} by order "
                f"{order} at x={x}", TruncationWarning, stacklevel=2)
            return value
        order *= 2
        finer, scale, _, _ = _series_at_order(spec, f, y, order, policy)
        if abs(finer - value) <= policy.quad_rel_tol * max(abs(finer), 1e-3 * scale, 1e-300):
            return finer
        value = finer


def thread_count() -> int:
    env = os.environ.get("BSL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def evaluate_grid(spec: OperatorSpec, f: FuncExpr, xs, policy: EvalPolicy = EvalPolicy(),
                  threads: int | None = None) -> np.ndarray:
    """Evaluate over many points; results come back in input order."""
    xs = [float(x) for x in xs]
    threads = threads or thread_count()
    if threads == 1 or len(xs) < 2:
        return np.array([evaluate(spec, f, x, policy) for x in xs])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(lambda x: evaluate(spec, f, x, policy), xs)))


def closed_moments(spec: OperatorSpec, x: float, policy: EvalPolicy = EvalPolicy(),
                   numeric: bool = True) -> MomentReport:
    """Closed-form moments for ``spec`` at ``x`` with quadrature counterparts.

    King second moments come from composing the Stancu moments with r_n(x);
    the alternative printed values are attached as ``paper_e2``/``paper_m2``.
    """
    from .funcparse import catalog

    e0, e1, e2, m1, m2 = closed_form(spec, x)
    report = MomentReport(spec.variant.value, float(x), e0, e1, e2, m1, m2)
    if spec.variant is Variant.KING:
        pe2, pm2 = paper_king_moments(spec, x)
        report.extras.update(paper_e2=pe2, paper_m2=pm2,
                             paper_e2_rel_gap=abs(pe2 - e2) / max(abs(e2), 1e-300))
    if numeric:
        report.numeric_e0, report.numeric_e1, report.numeric_e2 = (
            evaluate(spec, catalog(name), x, policy) for name in ("e0", "e1", "e2"))
        report.fill_discrepancy()
    return report
