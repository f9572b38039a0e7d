"""Error-bound checks: the t2 grid, implied constants and the weighted rate."""

import warnings

from bsslab.analysis import (
    C_BUDGET,
    bound_check_theorem_the1,
    bound_check_weighted_rate,
    korovkin_norms,
    run_t2_grid,
)
from bsslab.funcparse import catalog
from bsslab.numerics import TruncationWarning
from bsslab.operators import OperatorSpec, Variant
from common import save

C, S = Variant.CLASSICAL, Variant.STANCU
SPECS = [OperatorSpec(C, 10, 1), OperatorSpec(C, 50, 2), OperatorSpec(C, 200, 5)]
NAMES = ("exp_neg", "sin", "runge")


def main():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        rows = [{"f": name, "n": r.components["n"], "p": r.components["p"],
                 "b": r.components["b"], "lhs": r.lhs, "rhs_proven": r.components["rhs_proven"],
                 "rhs_stated": r.components["rhs_stated"], "holds": r.holds,
                 "stated_holds": r.components["stated_holds"]}
                for name, r in zip([n for n in NAMES for _ in range(9)], run_t2_grid(NAMES))]
        save("bounds_t2", rows)

        rows = []
        for name in NAMES:
            for s in SPECS:
                for x in (0.5, 1.0, 2.0, 5.0):
                    r = bound_check_theorem_the1(catalog(name), s, x)
                    rows.append({"f": name, "n": s.n, "p": s.p, "x": x} | r.components)
        save("bounds_the1", rows, {"C_budget": C_BUDGET})

        rows = []
        for s in SPECS + [OperatorSpec(S, 50, 2, 1.0, 2.0)]:
            for gamma in (0.0, 1.0):
                for x in (0.5, 1.0, 2.0):
                    r = bound_check_weighted_rate(catalog("sin"), s, x, gamma)
                    rows.append({"variant": s.variant.value, "n": s.n, "p": s.p, "lhs": r.lhs,
                                 "rhs": r.rhs, "holds": r.holds} | r.components)
        save("bounds_weighted_rate", rows)

    rows = []
    for n in (10, 100, 1000, 10_000):
        for spec in (OperatorSpec(C, n, 1), OperatorSpec(S, n, 1, 3.0, 5.0)):
            norms = korovkin_norms(spec)
            rows.append({"variant": spec.variant.value, "n": n,
                         "e0": norms[0], "e1": norms[1], "e2": norms[2]})
    save("korovkin_norms", rows, {"weight": "1 + x^2", "x_max": 1e3})


if __name__ == "__main__":
    main()
