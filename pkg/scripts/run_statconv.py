"""Statistical against ordinary convergence of q_n and the moment-gap sequences."""

from bsslab.statconv import SCHEDULES, run_statconv
from common import save


def main(N: int = 100_000, eps: float = 0.05):
    for schedule in SCHEDULES:
        rep = run_statconv(schedule, N, eps)
        curves = [{"sequence": name, "N": n, "density": d}
                  for name, r in [("q_n", rep.q_statistical)] + list(rep.sequences.items())
                  for n, d in zip(r.N_list, r.densities)]
        meta = {"schedule": schedule, "N": N, "eps": eps,
                "squares_with_abs_q_minus_1_ge_half": rep.squares_far_from_one,
                "q_pow_n_limit": rep.power["a"], "passed": rep.passed}
        save(f"statconv_{schedule}", rep.rows(), meta)
        save(f"statconv_{schedule}_densities", curves, meta)


if __name__ == "__main__":
    main()
