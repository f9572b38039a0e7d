"""Closed-form against quadrature moments for the classical, Stancu, King and q operators."""

import numpy as np

from bsslab.operators import OperatorSpec, Variant, closed_moments, king_domain_start
from bsslab.qcalc import QContext, QOperatorSpec, q_moments
from common import save

NP_GRID = [(5, 1), (10, 2), (50, 5), (200, 1)]
X_GRID = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]


def main():
    rows = []
    for n, p in NP_GRID:
        for a, b in [(0, 0), (1, 2), (3, 5)]:
            variant = Variant.CLASSICAL if a == b == 0 else Variant.STANCU
            spec = OperatorSpec(variant, n, p, a, b)
            for x in X_GRID:
                rows.append({"n": n, "p": p, "alpha": a, "beta": b} | closed_moments(spec, x).as_row())
    save("moments_classical_stancu", rows)

    rows = []
    for spec in (OperatorSpec(Variant.KING, 10, 1, 1, 2), OperatorSpec(Variant.KING, 50, 3, 3, 5)):
        for x in king_domain_start(spec) + np.linspace(0, 8, 9):
            rows.append({"n": spec.n, "p": spec.p, "alpha": spec.alpha, "beta": spec.beta}
                        | closed_moments(spec, float(x)).as_row())
    save("moments_king", rows)

    rows = []
    for q in (0.5, 0.8, 0.95):
        for n, p in [(4, 1), (10, 2), (40, 1)]:
            for x in (0.0, 1.0, 5.0):
                rep = q_moments(QOperatorSpec(n, p, QContext(q)), x)
                rows.append({"n": n, "p": p} | rep.as_row())
    save("moments_q", rows)


if __name__ == "__main__":
    main()
