"""q-Voronovskaja along q_n = 1 - n^-2 against both candidate limits."""

from bsslab.analysis import q_voronovskaja_run
from bsslab.funcparse import catalog
from common import save

N_LIST = [32, 64, 128, 256, 512, 1024]


def main():
    rows = []
    for name in ("e1", "e2", "e3"):
        for rule in ("printed", "moments"):
            for r in q_voronovskaja_run(catalog(name), 1.0, N_LIST, target_rule=rule):
                rows.append({"f": name, "target_rule": rule, "n": r.n, "q": r.q,
                             "scaled_error": r.scaled_error, "target": r.target,
                             "abs_gap": r.abs_gap})
    save("q_voronovskaja", rows, {"x": 1.0, "p": 1, "schedule": "q_n = 1 - n^-2"})


if __name__ == "__main__":
    main()
