"""Scalar kernels shared by every operator evaluator.

Log-gamma, negative-binomial log-weights, generalized Gauss-Laguerre rules
and an adaptive series summer.  Everything combinatorial lives in log space
and is exponentiated as late as possible.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import betaln

__all__ = [
    "EvalPolicy",
    "QuadRule",
    "SeriesPolicy",
    "SeriesResult",
    "TruncationWarning",
    "gauss_laguerre",
    "laguerre_block",
    "log_gamma",
    "log_negbin_weight",
    "log_negbin_weights",
    "sum_series",
]


class TruncationWarning(UserWarning):
    """A series or node sum hit its cap before meeting the tolerance."""


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeriesPolicy:
    rel_tol: float = 1e-12
    consecutive_small: int = 10
    k_max: int = 200_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.consecutive_small < 1:
            raise ValueError("consecutive_small must be >= 1")


@dataclass(frozen=True)
class EvalPolicy:
    """Tolerances and caps for operator evaluation.

    ``quad_order`` is the starting Gauss-Laguerre order; it is doubled up to
    ``max_quad_order`` while two successive orders disagree by more than
    ``quad_rel_tol``.
    """

    quad_order: int = 32
    max_quad_order: int = 128
    quad_rel_tol: float = 1e-10
    series: SeriesPolicy = field(default_factory=SeriesPolicy)

    def __post_init__(self):
        if self.quad_order < 1 or self.max_quad_order < self.quad_order:
            raise ValueError("need 1 <= quad_order <= max_quad_order")


@dataclass(frozen=True)
class QuadRule:
    """Generalized Gauss-Laguerre rule for the weight t**alpha * exp(-t).

    ``weights`` are normalized to sum to one; multiply by
    ``exp(log_norm) == Gamma(alpha + 1)`` to recover the raw weights.
    """

    order: int
    alpha: float
    nodes: np.ndarray
    weights: np.ndarray
    log_norm: float

    @property
    def raw_weights(self) -> np.ndarray:
        return self.weights * math.exp(self.log_norm)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Approximate the integral of f(t) t**alpha exp(-t) over (0, inf)."""
        return float(np.dot(self.weights, f(self.nodes))) * math.exp(self.log_norm)


@dataclass
class SeriesResult:
    value: float
    n_terms: int
    reason: str
    converged: bool


def log_gamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_negbin_weight(k: int, r: int, x: float) -> float:
    """ln of C(r+k-1, k) x**k / (1+x)**(r+k)."""
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if x == 0:
        return 0.0 if k == 0 else -math.inf
    if k == 0:
        return -r * math.log1p(x)
    # C(r+k-1, k) = 1 / (k B(k, r)); betaln avoids the lgamma cancellation at large k
    return (-math.log(k) - float(betaln(k, r))
            - k * math.log1p(1.0 / x) - r * math.log1p(x))


def log_negbin_weights(r: int, x: float, k: np.ndarray) -> np.ndarray:
    """Vectorized :func:`log_negbin_weight` over an integer array ``k``."""
    k = np.asarray(k, dtype=float)
    if x == 0:
        return np.where(k == 0, 0.0, -np.inf)
    out = np.empty_like(k)
    zero = k == 0
    out[zero] = -r * math.log1p(x)
    kk = k[~zero]
    out[~zero] = (-np.log(kk) - betaln(kk, r)
                  - kk * math.log1p(1.0 / x) - r * math.log1p(x))
    return out


def _christoffel_weights(x: np.ndarray, diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    # 1 / sum_j p_j(x)^2 with p_j orthonormal for the unit-mass weight.
    # Eigenvector-based weights lose all relative accuracy at the top nodes.
    # Works row-wise on stacked (K, m) node arrays with (K, m) / (K, m-1) coefficients.
    m = diag.shape[-1]
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    s = np.ones_like(x)
    log_scale = np.zeros_like(x)
    for j in range(m - 1):
        b_prev = off[..., j - 1, None] if j > 0 else 0.0
        p_next = ((x - diag[..., j, None]) * p - b_prev * p_prev) / off[..., j, None]
        p_prev, p = p, p_next
        s += p * p
        big = s > 1e150
        if np.any(big):
            f = np.where(big, 1e-75, 1.0)
            p *= f
            p_prev *= f
            s *= f * f
            log_scale += np.where(big, 2 * math.log(1e75), 0.0)
    return np.exp(-np.log(s) - log_scale)


def _build_rules(order: int, alphas: np.ndarray) -> list[QuadRule]:
    alphas = np.asarray(alphas, dtype=float)
    if order == 1:
        nodes = (alphas + 1.0)[:, None]
        weights = np.ones_like(nodes)
    else:
        i = np.arange(order, dtype=float)
        j = np.arange(1, order, dtype=float)
        diag = 2.0 * i[None, :] + alphas[:, None] + 1.0
        off = np.sqrt(j[None, :] * (j[None, :] + alphas[:, None]))
        jac = np.zeros((len(alphas), order, order))
        idx = np.arange(order)
        jac[:, idx, idx] = diag
        jac[:, idx[1:], idx[:-1]] = off
        jac[:, idx[:-1], idx[1:]] = off
        try:
            nodes = np.linalg.eigvalsh(jac)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise QuadratureError(
                f"tridiagonal eigen-solve failed for order={order}, "
                f"alphas in [{alphas.min()}, {alphas.max()}]: {exc}"
            ) from exc
        weights = _christoffel_weights(nodes, diag, off)
    rules = []
    for a, x, w in zip(alphas, nodes, weights):
        if not (x[0] > 0 and np.all(np.diff(x) > 0) and np.all(np.isfinite(w))):
            raise QuadratureError(
                f"degenerate Gauss-Laguerre rule for order={order}, alpha={a}: "
                f"min node {x.min()}, finite weights={bool(np.all(np.isfinite(w)))}"
            )
        x = x.copy()
        w = w.copy()
        x.setflags(write=False)
        w.setflags(write=False)
        rules.append(QuadRule(order, float(a), x, w, math.lgamma(a + 1.0)))
    return rules


class _RuleCache:
    """LRU cache of quadrature rules; one lock serializes all mutation."""

    def __init__(self, maxsize: int = 4096):
        self.maxsize = maxsize
        self._data: OrderedDict[tuple[int, float], QuadRule] = OrderedDict()
        self._lock = threading.Lock()

    def get_many(self, order: int, alphas) -> list[QuadRule]:
        keys = [(order, float(a)) for a in alphas]
        with self._lock:
            found = {}
            for key in keys:
                rule = self._data.get(key)
                if rule is not None:
                    self._data.move_to_end(key)
                    found[key] = rule
        missing = sorted({k[1] for k in keys if k not in found})
        if missing:
            built = _build_rules(order, np.array(missing))
            with self._lock:
                for rule in built:
                    key = (order, rule.alpha)
                    found[key] = rule
                    self._data[key] = rule
                    self._data.move_to_end(key)
                while len(self._data) > self.maxsize:
                    self._data.popitem(last=False)
        return [found[k] for k in keys]

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    def __len__(self) -> int:
        return len(self._data)


RULE_CACHE = _RuleCache(4096)


def gauss_laguerre(order: int, alpha: float = 0.0) -> QuadRule:
    """Gauss rule for the weight ``t**alpha * exp(-t)`` on (0, inf).

    Nodes come from the symmetric tridiagonal Jacobi matrix of the Laguerre
    recurrence; weights are Christoffel numbers from the orthonormal
    recurrence.  Rules are cached (LRU, 4096 entries).
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return RULE_CACHE.get_many(int(order), [alpha])[0]


def laguerre_block(order: int, alphas) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (nodes, normalized weights) for the given alphas, shape (K, order)."""
    rules = RULE_CACHE.get_many(int(order), list(alphas))
    if not rules:
        return np.empty((0, order)), np.empty((0, order))
    return np.stack([r.nodes for r in rules]), np.stack([r.weights for r in rules])


def sum_series(term: Callable, policy: SeriesPolicy = SeriesPolicy(), start: int = 0,
               block: int | None = None) -> SeriesResult:
    """Sum ``term(k)`` for k = start, start+1, ...

    Stops once ``policy.consecutive_small`` successive terms satisfy
    ``|term| < rel_tol * |partial sum|``, or at ``k_max`` terms (flagged with a
    :class:`TruncationWarning`).  With ``block`` set, ``term`` receives an
    integer array of that many indices and must return an array.
    """
    partial = 0.0
    comp = 0.0  # Kahan compensation
    small = 0
    k = start
    n = 0
    while n < policy.k_max:
        if block:
            width = min(block, policy.k_max - n)
            values = np.asarray(term(np.arange(k, k + width)), dtype=float)
        else:
            values = (float(term(k)),)
        for v in values:
            y = v - comp
            t = partial + y
            comp = (t - partial) - y
            partial = t
            n += 1
            k += 1
            if abs(v) < policy.rel_tol * abs(partial):
                small += 1
                if small >= policy.consecutive_small:
                    return SeriesResult(partial, n, "tolerance", True)
            elif v == 0.0 and partial == 0.0:
                small += 1
                if small >= policy.consecutive_small:
                    return SeriesResult(partial, n, "zero", True)
            else:
                small = 0
    warnings.warn(
        f"series hit k_max={policy.k_max} without meeting rel_tol={policy.rel_tol}",
        TruncationWarning, stacklevel=2,
    )
    return SeriesResult(partial, n, "k_max", False)
