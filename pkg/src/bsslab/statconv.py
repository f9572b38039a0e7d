"""Natural density and statistical limits of q-operator moment sequences.

A statistical limit cannot be decided from finitely many terms.  Every
verdict here is "consistent with" a limit over the examined range, never a
proof of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis import log_grid

__all__ = [
    "IndexSet",
    "OrdinaryLimitReport",
    "QSequence",
    "SCHEDULES",
    "StLimitReport",
    "StatconvReport",
    "default_n_list",
    "density_curve",
    "moment_gap_sequences",
    "natural_density",
    "ordinary_limit_check",
    "power_limit_report",
    "run_statconv",
    "st_limit_check",
    "weighted_e2_gaps",
]

FINAL_DENSITY_MAX = 0.01


@dataclass(frozen=True)
class IndexSet:
    """A subset of the positive integers, by vectorized predicate or explicit members."""

    predicate: Callable[[np.ndarray], np.ndarray] | None = None
    members: tuple[int, ...] | None = None
    description: str = ""

    def __post_init__(self):
        if (self.predicate is None) == (self.members is None):
            raise ValueError("give exactly one of predicate or members")

    def mask(self, N: int) -> np.ndarray:
        """Boolean membership of 1..N."""
        if self.members is not None:
            out = np.zeros(N, dtype=bool)
            m = np.asarray(self.members, dtype=np.int64)
            m = m[(m >= 1) & (m <= N)]
            out[m - 1] = True
            return out
        return np.asarray(self.predicate(np.arange(1, N + 1)), dtype=bool)

    @staticmethod
    def evens() -> "IndexSet":
        return IndexSet(lambda k: k % 2 == 0, description="even numbers")

    @staticmethod
    def squares() -> "IndexSet":
        return IndexSet(_is_square, description="perfect squares")

    @staticmethod
    def empty() -> "IndexSet":
        return IndexSet(members=(), description="empty set")


def _is_square(k: np.ndarray) -> np.ndarray:
    r = np.round(np.sqrt(k)).astype(np.int64)
    return r * r == k


def natural_density(s: IndexSet, N: int) -> float:
    """|{k <= N : k in s}| / N."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return float(np.count_nonzero(s.mask(N))) / N


def density_curve(s: IndexSet, N: int) -> np.ndarray:
    """Running densities |K_n| / n for n = 1..N."""
    return np.cumsum(s.mask(N)) / np.arange(1, N + 1)


@dataclass(frozen=True)
class QSequence:
    """A schedule n -> q_n in (0, 1), vectorized over integer arrays."""

    generator: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def values(self, N: int) -> np.ndarray:
        q = np.asarray(self.generator(np.arange(1, N + 1)), dtype=float)
        bad = ~((q > 0) & (q < 1))
        if np.any(bad):
            k = int(np.argmax(bad)) + 1
            raise ValueError(f"schedule {self.description!r} gives q_{k} = {q[k - 1]} outside (0, 1)")
        return q


def _one_minus_inv(n):
    # shifted by one so that q_1 = 1/2 stays inside (0, 1)
    return 1.0 - 1.0 / (n + 1.0)


def _square_perturbed(n):
    return np.where(_is_square(n), 0.5, 1.0 - 1.0 / np.maximum(n, 2))


SCHEDULES: dict[str, QSequence] = {
    "one-minus-inv-n": QSequence(_one_minus_inv, "q_n = 1 - 1/(n+1)"),
    "square-perturbed": QSequence(_square_perturbed,
                                  "q_n = 1/2 on perfect squares, 1 - 1/n elsewhere"),
}


@dataclass
class StLimitReport:
    L: float
    eps: float
    N_list: list[int]
    densities: list[float]
    final_density: float
    verdict: bool
    label: str


def default_n_list(N: int, per_decade: int = 4) -> list[int]:
    """Geometric checkpoints ending at N, down to N/100."""
    pts = {int(round(N * 10 ** (-i / per_decade))) for i in range(2 * per_decade + 1)}
    return sorted(p for p in pts if p >= 1)


def st_limit_check(seq, L: float, eps: float, N_list: Sequence[int] | None = None,
                   N: int | None = None) -> StLimitReport:
    """Densities of {j <= N : |x_j - L| >= eps} at each checkpoint N.

    ``seq`` is an array of x_1..x_N or a vectorized map n -> x_n.  The
    verdict is positive when the densities at checkpoints >= N_max/10 never
    increase and the last one is below 0.01.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if N_list is None:
        if N is None:
            raise ValueError("give N_list or N")
        N_list = default_n_list(N)
    N_list = sorted(int(n) for n in N_list)
    n_max = N_list[-1]
    x = np.asarray(seq(np.arange(1, n_max + 1)) if callable(seq) else seq, dtype=float)
    if x.size < n_max:
        raise ValueError(f"sequence has {x.size} terms, need {n_max}")
    exc = np.cumsum(~(np.abs(x[:n_max] - L) < eps))  # NaN counts as an exception
    dens = [float(exc[n - 1]) / n for n in N_list]
    late = [d for n, d in zip(N_list, dens) if n >= n_max / 10]
    ok = all(b <= a for a, b in zip(late, late[1:])) and dens[-1] < FINAL_DENSITY_MAX
    label = ("consistent with" if ok else "not consistent with") + f" st-lim = {L:g}"
    return StLimitReport(L, eps, N_list, dens, dens[-1], ok, label)


@dataclass
class OrdinaryLimitReport:
    holds: bool
    tail_start: int
    violations: int
    last_violation: int | None


def ordinary_limit_check(seq, L: float, eps: float, N: int,
                         tail_fraction: float = 0.01) -> OrdinaryLimitReport:
    """Whether |x_j - L| < eps for every j in the tail [tail_fraction*N, N]."""
    x = np.asarray(seq(np.arange(1, N + 1)) if callable(seq) else seq, dtype=float)[:N]
    start = max(1, math.ceil(tail_fraction * N))
    bad = ~(np.abs(x - L) < eps)
    bad[: start - 1] = False
    idx = np.flatnonzero(bad)
    return OrdinaryLimitReport(idx.size == 0, start, int(idx.size),
                               int(idx[-1]) + 1 if idx.size else None)


def _q_int(m: np.ndarray, q: np.ndarray) -> np.ndarray:
    return -np.expm1(m * np.log(q)) / (1.0 - q)


def moment_gap_sequences(p: int, qs: QSequence, N: int):
    """alpha_n, beta_n, gamma_n for n = 1..N under q = q_n.

    alpha_n = [n+p+1]_q/(q^6 [n+p]_q) - 1, beta_n = (1+2q+q^2)/(q^5 [n+p]_q),
    gamma_n = (1+q)/(q^3 [n+p]_q^2).
    """
    n = np.arange(1, N + 1, dtype=float)
    q = qs.values(N)
    nq = _q_int(n + p, q)
    nq1 = _q_int(n + p + 1, q)
    alpha = nq1 / (q**6 * nq) - 1.0
    beta = (1 + 2 * q + q * q) / (q**5 * nq)
    gamma = (1 + q) / (q**3 * nq * nq)
    return alpha, beta, gamma


def weighted_e2_gaps(p: int, qs: QSequence, N: int, x_max: float = 1e3,
                     per_decade: int = 16, block: int = 8192) -> np.ndarray:
    """||L^{q_n}(e_2) - e_2||_rho from the closed forms, n = 1..N."""
    alpha, beta, gamma = moment_gap_sequences(p, qs, N)
    x = log_grid(x_max, per_decade)
    rho = 1.0 + x * x
    out = np.empty(N)
    for a in range(0, N, block):
        sl = slice(a, a + block)
        g = alpha[sl, None] * x * x + beta[sl, None] * x + gamma[sl, None]
        out[sl] = np.max(np.abs(g) / rho, axis=1)
    return out


def power_limit_report(qs: QSequence, N: int, eps: float = 0.05,
                       N_list: Sequence[int] | None = None) -> dict:
    """Check the condition st-lim q_n^n = a < 1 for a schedule.

    The candidate a is the median of q_n^n over the last tenth of the range;
    the result is reported, not enforced.
    """
    n = np.arange(1, N + 1, dtype=float)
    qn = qs.values(N) ** n
    a = float(np.median(qn[int(0.9 * N):]))
    rep = st_limit_check(qn, a, eps, N_list or default_n_list(N))
    return {"a": a, "a_below_one": a < 1, "verdict": rep.verdict, "label": rep.label,
            "final_density": rep.final_density}


@dataclass
class StatconvReport:
    schedule: str
    N: int
    eps: float
    q_ordinary: OrdinaryLimitReport
    q_statistical: StLimitReport
    squares_far_from_one: int
    sequences: dict[str, StLimitReport] = field(default_factory=dict)
    power: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict for r in self.sequences.values())

    def rows(self) -> list[dict]:
        out = [{"sequence": "q_n", "L": 1.0, "ordinary": self.q_ordinary.holds,
                "final_density": self.q_statistical.final_density,
                "verdict": self.q_statistical.label}]
        for name, r in self.sequences.items():
            out.append({"sequence": name, "L": r.L, "ordinary": None,
                        "final_density": r.final_density, "verdict": r.label})
        return out


def run_statconv(schedule: str = "square-perturbed", N: int = 100_000, eps: float = 0.05,
                 p: int = 1, N_list: Sequence[int] | None = None) -> StatconvReport:
    """Ordinary and statistical behaviour of q_n and of alpha_n, beta_n, gamma_n."""
    try:
        qs = SCHEDULES[schedule]
    except KeyError:
        raise ValueError(f"unknown schedule {schedule!r}; choose from {', '.join(SCHEDULES)}") from None
    N_list = list(N_list) if N_list is not None else default_n_list(N)
    q = qs.values(N)
    sq = _is_square(np.arange(1, N + 1))
    far = int(np.count_nonzero(sq & (np.abs(q - 1) >= 0.5)))
    report = StatconvReport(schedule, N, eps,
                            ordinary_limit_check(q, 1.0, eps, N),
                            st_limit_check(q, 1.0, eps, N_list), far)
    alpha, beta, gamma = moment_gap_sequences(p, qs, N)
    for name, s in (("alpha", alpha), ("beta", beta), ("gamma", gamma),
                    ("e2_weighted_gap", weighted_e2_gaps(p, qs, N))):
        report.sequences[name] = st_limit_check(s, 0.0, eps, N_list)
    report.power = power_limit_report(qs, N, eps, N_list)
    return report
