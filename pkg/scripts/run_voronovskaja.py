"""Scaled errors n (L f - f) against the Voronovskaja limit, with log-log slopes."""

from bsslab.analysis import loglog_slope, voronovskaja_run
from bsslab.funcparse import catalog
from bsslab.operators import OperatorSpec, Variant
from common import save

N_LIST = [2**k for k in range(5, 13)]


def main():
    rows, summary = [], []
    for name in ("e2", "exp_neg", "sin", "runge"):
        for x in (0.5, 1.0, 2.0):
            recs = voronovskaja_run(OperatorSpec(Variant.CLASSICAL, 32, 1), catalog(name), x, N_LIST)
            rows += [{"f": name, "x": x, "n": r.n, "scaled_error": r.scaled_error,
                      "target": r.target, "abs_gap": r.abs_gap} for r in recs]
            summary.append({"f": name, "x": x, "slope": loglog_slope(recs),
                            "final_gap": recs[-1].abs_gap})
    save("voronovskaja", rows, {"p": 1})
    save("voronovskaja_slopes", summary, {"p": 1})


if __name__ == "__main__":
    main()
