"""Moduli of continuity, weighted norms, Voronovskaja runs and bound checks.

Grid estimators of suprema are lower bounds of the true values.  Every
bound check therefore uses exact closed-form central moments on the
right-hand side, so the estimation error pushes the checks toward the
conservative side only through the modulus terms.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .funcparse import FuncExpr, Growth, catalog
from .numerics import EvalPolicy, SeriesPolicy, TruncationWarning
from .operators import (
    OperatorSpec,
    Variant,
    classical_central_moments,
    closed_form,
    evaluate,
    thread_count,
)
from .qcalc import QContext, QOperatorSpec, q_evaluate, q_integer

__all__ = [
    "BoundReport",
    "ConvergenceRecord",
    "ModulusEstimate",
    "ModulusKind",
    "WeightedNormResult",
    "bound_check_theorem_t2",
    "bound_check_theorem_the1",
    "bound_check_weighted_rate",
    "default_q_schedule",
    "korovkin_norms",
    "log_grid",
    "loglog_slope",
    "modulus",
    "q_voronovskaja_run",
    "run_t2_grid",
    "voronovskaja_run",
    "weighted_modulus",
    "weighted_norm",
]

C_BUDGET = 16.0


class ModulusKind(str, enum.Enum):
    OMEGA1 = "omega1"
    OMEGA2 = "omega2"
    OMEGA_B = "omega_b"
    OMEGA_WEIGHTED = "omega_weighted"


@dataclass(frozen=True)
class ModulusEstimate:
    """Grid supremum; never exceeds the true modulus up to rounding."""

    delta: float
    value: float
    grid_resolution: float
    kind: ModulusKind


@dataclass(frozen=True)
class ConvergenceRecord:
    n: int
    scaled_error: float
    target: float
    abs_gap: float
    q: float = 1.0


@dataclass(frozen=True)
class WeightedNormResult:
    norm_value: float
    weight: str
    gamma: float
    x_max: float
    grid: str
    argmax: float = math.nan


@dataclass
class BoundReport:
    """One inequality check: ``lhs <= rhs`` with supporting components."""

    name: str
    lhs: float
    rhs: float
    holds: bool
    components: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


# ---------------------------------------------------------------------------
# moduli

_H_STEPS = 64
_X_SUBDIV = 16


def _h_values(delta: float) -> np.ndarray:
    return delta * np.arange(1, _H_STEPS + 1) / _H_STEPS


def modulus(f: Callable, delta: float, kind: ModulusKind | str = ModulusKind.OMEGA1,
            domain: tuple[float, float] = (0.0, 20.0)) -> ModulusEstimate:
    """Grid estimate of omega(f, delta) or omega_2(f, delta) on ``domain``.

    x runs over steps of delta/16 and h over 64 equal steps in (0, delta];
    every evaluation point stays inside the domain.  ``omega_b`` is the
    first-order modulus restricted to the domain [0, b].
    """
    kind = ModulusKind(kind)
    lo, hi = map(float, domain)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not hi > lo:
        raise ValueError(f"empty domain {domain}")
    step = delta / _X_SUBDIV
    x = np.append(np.arange(lo, hi, step), hi)
    fx = np.asarray(f(x), dtype=float)
    best = 0.0
    with np.errstate(all="ignore"):
        for h in _h_values(delta):
            if kind is ModulusKind.OMEGA2:
                xs = x[x + 2 * h <= hi]
                if xs.size == 0:
                    continue
                d = np.asarray(f(xs + 2 * h)) - 2 * np.asarray(f(xs + h)) + fx[: xs.size]
            elif kind in (ModulusKind.OMEGA1, ModulusKind.OMEGA_B):
                xs = x[x + h <= hi]
                if xs.size == 0:
                    continue
                d = np.asarray(f(xs + h)) - fx[: xs.size]
            else:
                raise ValueError("use weighted_modulus for the weighted kind")
            best = max(best, float(np.nanmax(np.abs(d))))
    return ModulusEstimate(delta, best, step, kind)


def weighted_modulus(f: Callable, delta: float, gamma: float = 0.0,
                     domain: tuple[float, float] = (0.0, 50.0)) -> ModulusEstimate:
    """Grid estimate of sup |f(x+h) - f(x)| / (1 + (x+h)^(2+gamma)), 0 <= h <= delta."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    lo, hi = map(float, domain)
    step = delta / _X_SUBDIV
    x = np.append(np.arange(lo, hi, step), hi)
    fx = np.asarray(f(x), dtype=float)
    best = 0.0
    with np.errstate(all="ignore"):
        for h in _h_values(delta):
            xh = x + h
            d = np.abs(np.asarray(f(xh)) - fx) / (1.0 + xh ** (2.0 + gamma))
            best = max(best, float(np.nanmax(d)))
    return ModulusEstimate(delta, best, step, ModulusKind.OMEGA_WEIGHTED)


def _weight(weight: str, gamma: float):
    if weight == "rho":
        return lambda x: 1.0 + x * x
    if weight == "rho_gamma":
        return lambda x: 1.0 + x ** (2.0 + gamma)
    raise ValueError(f"unknown weight {weight!r}; use 'rho' or 'rho_gamma'")


def log_grid(x_max: float, per_decade: int = 64, x_min: float = 1e-6) -> np.ndarray:
    """0 followed by points 10^(i/per_decade) from x_min to x_max."""
    lo = math.floor(math.log10(x_min) * per_decade)
    hi = math.ceil(math.log10(x_max) * per_decade)
    pts = 10.0 ** (np.arange(lo, hi + 1) / per_decade)
    return np.concatenate([[0.0], pts[pts <= x_max * (1 + 1e-12)]])


def weighted_norm(g: Callable, weight: str = "rho", gamma: float = 0.0,
                  x_max: float = 1e3, per_decade: int = 64) -> WeightedNormResult:
    """sup |g(x)| / rho(x) over a log-spaced grid on [0, x_max]."""
    if not x_max > 0:
        raise ValueError(f"x_max must be positive, got {x_max}")
    x = log_grid(x_max, per_decade)
    with np.errstate(all="ignore"):
        vals = np.abs(np.asarray(g(x), dtype=float)) / _weight(weight, gamma)(x)
    i = int(np.nanargmax(vals))
    return WeightedNormResult(float(vals[i]), weight, gamma, x_max,
                              f"0 + log10 grid, {per_decade}/decade from 1e-6", float(x[i]))


def korovkin_norms(spec: OperatorSpec, x_max: float = 1e3) -> dict[int, float]:
    """||L(e_r) - e_r||_rho for r = 0, 1, 2 from the closed-form moments."""
    out = {}
    for r in range(3):
        def g(x, r=r):
            return closed_form(spec, x)[r] - x**r
        out[r] = weighted_norm(g, "rho", x_max=x_max).norm_value
    return out


# ---------------------------------------------------------------------------
# Voronovskaja harness

def loglog_slope(records) -> float:
    """Least-squares slope of log(abs_gap) against log(n)."""
    pts = [(math.log(r.n), math.log(r.abs_gap)) for r in records if r.abs_gap > 0]
    if len(pts) < 2:
        return math.nan
    a = np.array(pts)
    return float(np.polyfit(a[:, 0], a[:, 1], 1)[0])


def _need_derivatives(f: FuncExpr):
    if not f.has_derivatives:
        raise ValueError(
            f"{f.source or 'f'} has no first/second derivatives; use a catalog function "
            "(e0..e3, exp_neg, sin, runge) or a parsed expression")


def voronovskaja_run(spec: OperatorSpec, f: FuncExpr, x: float, n_list,
                     policy: EvalPolicy = EvalPolicy(),
                     threads: int | None = None) -> list[ConvergenceRecord]:
    """n (L_n f(x) - f(x)) against f'(x) + (x^2 + 2x)/2 f''(x), p fixed."""
    if spec.variant is not Variant.CLASSICAL:
        raise ValueError("the Voronovskaja limit is stated for the classical operator")
    _need_derivatives(f)
    fx = float(f(x))
    target = float(f.d1(x)) + (x * x + 2 * x) / 2 * float(f.d2(x))

    def one(n):
        s = spec.with_n(int(n))
        scaled = n * (evaluate(s, f, x, policy) - fx)
        return ConvergenceRecord(int(n), scaled, target, abs(scaled - target))

    ns = sorted(int(n) for n in n_list)
    threads = threads or thread_count()
    if threads > 1 and len(ns) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(ns))) as pool:
            return list(pool.map(one, ns))
    return [one(n) for n in ns]


def default_q_schedule(n: int) -> float:
    """q_n = 1 - n^(-2)."""
    return 1.0 - 1.0 / (n * n)


def q_voronovskaja_run(f: FuncExpr, x: float, n_list, p: int = 1,
                       q_schedule: Callable[[int], float] = default_q_schedule,
                       A: float = 1.0, target_rule: str = "printed",
                       method: str = "auto",
                       policy: SeriesPolicy = SeriesPolicy()) -> list[ConvergenceRecord]:
    """[n]_q (L^q f(x) - f(x)) along q = q_n.

    ``target_rule="printed"`` compares against f'(x) + x f''(x);
    ``"moments"`` uses f'(x) + (x^2 + 2x)/2 f''(x), the limit implied by the
    closed-form q-moments under schedules with [n]_q (1 - q_n) -> 0.
    """
    _need_derivatives(f)
    fx = float(f(x))
    if target_rule == "printed":
        target = float(f.d1(x)) + x * float(f.d2(x))
    elif target_rule == "moments":
        target = float(f.d1(x)) + (x * x + 2 * x) / 2 * float(f.d2(x))
    else:
        raise ValueError(f"unknown target_rule {target_rule!r}")
    out = []
    for n in sorted(int(n) for n in n_list):
        q = float(q_schedule(n))
        spec = QOperatorSpec(n, p, QContext(q, A))
        scaled = q_integer(n, q) * (q_evaluate(spec, f, x, policy, method) - fx)
        out.append(ConvergenceRecord(n, scaled, target, abs(scaled - target), q))
    return out


# ---------------------------------------------------------------------------
# bound checks

def _sup_weighted(f: Callable, x_max: float = 1e3) -> float:
    return weighted_norm(f, "rho", x_max=x_max).norm_value


def bound_check_theorem_t2(f: FuncExpr, spec: OperatorSpec, b: float,
                           policy: EvalPolicy = EvalPolicy(), grid_points: int = 41,
                           proven_constant: bool = True) -> BoundReport:
    """sup_{[0,b]} |L f - f| against M (1+b^2) delta_n(b) + 2 omega_{b+1}(f, sqrt(delta_n(b))).

    With ``proven_constant`` the factor M is N_f = 6 M_f, the constant the
    argument actually delivers; otherwise M_f as stated.  Both right-hand
    sides are reported in ``components``.
    """
    if spec.variant is not Variant.CLASSICAL:
        raise ValueError("this error estimate is stated for the classical operator")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    xs = np.linspace(0.0, b, grid_points)
    lhs = float(np.max(np.abs(_eval_grid(spec, f, xs, policy) - np.asarray(f(xs)))))
    m_f = _sup_weighted(f)
    _, delta_b = classical_central_moments(spec.n, spec.p, b)
    om = modulus(f, math.sqrt(delta_b), ModulusKind.OMEGA_B, (0.0, b + 1.0)).value
    rhs_stated = m_f * (1 + b * b) * delta_b + 2 * om
    rhs_proven = 6 * m_f * (1 + b * b) * delta_b + 2 * om
    rhs = rhs_proven if proven_constant else rhs_stated
    return BoundReport("t2", lhs, rhs, bool(lhs <= rhs), {
        "M_f": m_f, "N_f": 6 * m_f, "delta_n_b": delta_b, "omega_b1": om,
        "rhs_stated": rhs_stated, "rhs_proven": rhs_proven,
        "stated_holds": bool(lhs <= rhs_stated), "b": b, "n": spec.n, "p": spec.p})


def _eval_grid(spec, f, xs, policy):
    threads = thread_count()
    if threads > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(lambda x: evaluate(spec, f, float(x), policy), xs)))
    return np.array([evaluate(spec, f, float(x), policy) for x in xs])


def bound_check_theorem_the1(f: FuncExpr, spec: OperatorSpec, x: float,
                             policy: EvalPolicy = EvalPolicy(), budget: float = C_BUDGET,
                             domain: tuple[float, float] = (0.0, 40.0)) -> BoundReport:
    """Implied constant C in |L f - f| <= C omega_2(f, sqrt(delta + alpha^2)) + omega(f, alpha).

    The theorem's constant is unquantified; ``budget`` is an engineering
    ceiling.  The report holds when C_impl < budget.
    """
    if spec.variant is not Variant.CLASSICAL:
        raise ValueError("this estimate is stated for the classical operator")
    lhs = abs(evaluate(spec, f, x, policy) - float(f(x)))
    alpha, delta = classical_central_moments(spec.n, spec.p, x)
    w1 = modulus(f, alpha, ModulusKind.OMEGA1, domain).value
    w2 = modulus(f, math.sqrt(delta + alpha * alpha), ModulusKind.OMEGA2, domain).value
    num = max(0.0, lhs - w1)
    if w2 > 0:
        c_impl = num / w2
        exceptional = False
    else:
        c_impl = 0.0 if num <= 1e-14 * max(1.0, lhs) else math.inf
        exceptional = num > 0
    return BoundReport("the1", c_impl, budget, bool(c_impl < budget), {
        "abs_error": lhs, "omega_alpha": w1, "omega2_term": w2, "C_impl": c_impl,
        "exceptional": exceptional, "x": x, "n": spec.n, "p": spec.p})


def _nu_squared(x: float, gamma: float) -> FuncExpr:
    def ev(t):
        return (1.0 + (x + np.abs(t - x)) ** (2.0 + gamma)) ** 2
    return FuncExpr(ev, growth=Growth.poly(4 + 2 * gamma), source=f"nu^2(x={x:g})")


def bound_check_weighted_rate(f: FuncExpr, spec: OperatorSpec, x: float, gamma: float = 0.0,
                              delta: float | None = None,
                              policy: EvalPolicy = EvalPolicy()) -> BoundReport:
    """|L f - f| against sqrt(L(nu^2)) (1 + sqrt(L(Psi^2))/delta) Omega_rho_gamma(f, delta).

    Psi_x(t) = |t - x| so L(Psi^2) is the second central moment.  delta
    defaults to sqrt(L(Psi^2)), which makes the bracket equal to 2.
    """
    if spec.variant is Variant.KING:
        raise ValueError("the weighted rate estimate covers the classical and Stancu operators")
    lhs = abs(evaluate(spec, f, x, policy) - float(f(x)))
    m2 = closed_form(spec, x)[4]
    if delta is None:
        delta = math.sqrt(m2)
    # nu^2 has a kink at t = x, so the order doubling may stop short of
    # quad_rel_tol; the shortfall is recorded rather than warned about
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        nu2 = evaluate(spec, _nu_squared(x, gamma), x, policy)
    omega = weighted_modulus(f, delta, gamma).value
    rhs = math.sqrt(nu2) * (1 + math.sqrt(m2) / delta) * omega
    return BoundReport("weighted_rate", lhs, rhs, bool(lhs <= rhs), {
        "L_nu2": nu2, "L_psi2": m2, "delta": delta, "Omega": omega, "gamma": gamma, "x": x,
        "nu2_quadrature_settled": not caught})


def run_t2_grid(f_names=("exp_neg", "sin", "runge"), specs=None, bs=(1.0, 2.0, 5.0),
                policy: EvalPolicy = EvalPolicy()) -> list[BoundReport]:
    specs = specs or [OperatorSpec(Variant.CLASSICAL, 10, 1), OperatorSpec(Variant.CLASSICAL, 50, 2),
                      OperatorSpec(Variant.CLASSICAL, 200, 5)]
    return [bound_check_theorem_t2(catalog(name), s, b, policy)
            for name in f_names for s in specs for b in bs]
