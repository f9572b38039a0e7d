"""Command-line front end: ``bsslab <subcommand> [flags]``.

Exit codes: 0 success, 2 bad input or domain error, 3 a check failed,
4 a truncation cap was hit under --strict.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    C_BUDGET,
    bound_check_theorem_t2,
    bound_check_theorem_the1,
    bound_check_weighted_rate,
    korovkin_norms,
    loglog_slope,
    q_voronovskaja_run,
    voronovskaja_run,
)
from .funcparse import GrowthError, ParseError, resolve
from .numerics import EvalPolicy, SeriesPolicy, TruncationWarning
from .operators import DomainError, OperatorSpec, Variant, closed_moments, evaluate_grid
from .qcalc import QContext, QOperatorSpec, q_evaluate, q_moments
from .statconv import SCHEDULES, run_statconv

EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_TRUNCATION = 0, 2, 3, 4


class InputError(ValueError):
    pass


@dataclass
class Output:
    meta: dict
    columns: list[str]
    rows: list[dict]
    failed: bool = False
    messages: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# parsing helpers

def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included when hit) or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        start, stop, step = map(float, parts)
    except ValueError:
        raise InputError(f"bad grid {text!r}; expected start:stop:step") from None
    if not step > 0:
        raise InputError(f"grid step must be positive, got {step}")
    if stop < start:
        raise InputError(f"grid stop {stop} is below start {start}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def parse_n_list(text: str) -> list[int]:
    try:
        ns = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"bad n-list {text!r}; expected comma-separated integers") from None
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise InputError(f"n-list must be non-empty and strictly increasing, got {text!r}")
    if ns[0] < 1:
        raise InputError("n-list entries must be positive")
    return ns


def _policy(args) -> EvalPolicy:
    series = SeriesPolicy(rel_tol=args.series_tol, k_max=args.k_max)
    return EvalPolicy(quad_order=args.quad_order, max_quad_order=max(128, args.quad_order),
                      series=series)


def _xs(args) -> list[float]:
    if args.x_grid is not None:
        return parse_grid(args.x_grid)
    if args.x is not None:
        return [args.x]
    raise InputError("give --x or --x-grid")


def _spec(args) -> OperatorSpec:
    if args.variant == "q":
        raise InputError("this subcommand does not take the q variant")
    try:
        return OperatorSpec(Variant(args.variant), args.n, args.p, args.alpha, args.beta)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _qspec(args, n: int | None = None) -> QOperatorSpec:
    if args.q is None:
        raise InputError("--q is required for the q variant")
    return QOperatorSpec(n or args.n, args.p, QContext(args.q, args.A))


def _base_meta(args) -> dict:
    skip = {"func", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


# ---------------------------------------------------------------------------
# subcommands

def cmd_moments(args) -> Output:
    xs = _xs(args)
    rows = []
    if args.variant == "q":
        tol = args.tol if args.tol is not None else 1e-6
        spec = _qspec(args)
        for x in xs:
            rep = q_moments(spec, x, policy=_policy(args).series)
            rows.append(rep.as_row())
    else:
        tol = args.tol if args.tol is not None else 1e-8
        spec = _spec(args)
        for x in xs:
            rows.append(closed_moments(spec, x, _policy(args)).as_row())
    failed = any(not (r["max_rel_discrepancy"] < tol) for r in rows)
    if args.variant == "q":
        failed = failed or any(not r["bound_holds"] for r in rows)
    columns = list(rows[0].keys()) if rows else []
    meta = _base_meta(args) | {"tolerance": tol}
    return Output(meta, columns, rows, failed)


def cmd_eval(args) -> Output:
    f = resolve(args.f)
    xs = _xs(args)
    if args.variant == "q":
        spec = _qspec(args)
        vals = [q_evaluate(spec, f, x, _policy(args).series, method="auto") for x in xs]
    else:
        vals = evaluate_grid(_spec(args), f, xs, _policy(args))
    rows = []
    for x, v in zip(xs, vals):
        fx = float(f(x))
        rows.append({"x": x, "value": float(v), "f": fx, "error": float(v) - fx})
    return Output(_base_meta(args), ["x", "value", "f", "error"], rows)


def cmd_voronovskaja(args) -> Output:
    f = resolve(args.f)
    if args.x is None:
        raise InputError("--x is required")
    ns = parse_n_list(args.n_list)
    if args.variant == "q":
        schedule = None
        if args.q is not None:
            schedule = (lambda n, q=args.q: q)
        kw = {"q_schedule": schedule} if schedule else {}
        recs = q_voronovskaja_run(f, args.x, ns, args.p, A=args.A, **kw)
    else:
        recs = voronovskaja_run(_spec(args), f, args.x, ns, _policy(args))
    rows = [{"n": r.n, "q": r.q, "scaled_error": r.scaled_error, "target": r.target,
             "abs_gap": r.abs_gap} for r in recs]
    meta = _base_meta(args) | {"loglog_slope": loglog_slope(recs)}
    return Output(meta, ["n", "q", "scaled_error", "target", "abs_gap"], rows)


def cmd_rates(args) -> Output:
    ns = parse_n_list(args.n_list)
    base = _spec(args)
    f = resolve(args.f) if args.f else None
    xs = parse_grid(args.x_grid) if args.x_grid else None
    rows = []
    for n in ns:
        spec = base.with_n(n)
        norms = korovkin_norms(spec)
        row = {"n": n, "korovkin_e0": norms[0], "korovkin_e1": norms[1], "korovkin_e2": norms[2]}
        if f is not None:
            grid = xs or parse_grid(f"0:{args.b}:{args.b / 20}")
            vals = evaluate_grid(spec, f, grid, _policy(args))
            row["sup_error"] = float(np.max(np.abs(vals - np.asarray(f(np.array(grid))))))
        rows.append(row)
    columns = list(rows[0].keys())
    return Output(_base_meta(args), columns, rows)


def cmd_bounds(args) -> Output:
    f = resolve(args.f)
    spec = _spec(args)
    policy = _policy(args)
    rows = []
    if spec.variant is Variant.CLASSICAL:
        t2 = bound_check_theorem_t2(f, spec, args.b, policy)
        rows.append({"check": "t2", "x": math.nan, "lhs": t2.lhs, "rhs": t2.rhs,
                     "holds": t2.holds, "detail": t2.components["rhs_stated"]})
        for x in _xs(args) if (args.x is not None or args.x_grid) else [0.5, 1.0, 2.0]:
            r = bound_check_theorem_the1(f, spec, x, policy)
            rows.append({"check": "the1_C", "x": x, "lhs": r.lhs, "rhs": r.rhs,
                         "holds": r.holds, "detail": r.components["abs_error"]})
    if spec.variant is not Variant.KING:
        for x in _xs(args) if (args.x is not None or args.x_grid) else [0.5, 1.0, 2.0]:
            r = bound_check_weighted_rate(f, spec, x, args.gamma, policy=policy)
            rows.append({"check": "weighted_rate", "x": x, "lhs": r.lhs, "rhs": r.rhs,
                         "holds": r.holds, "detail": r.components["Omega"]})
    if not rows:
        raise InputError("no bound checks apply to the King variant")
    failed = not all(r["holds"] for r in rows)
    meta = _base_meta(args) | {"C_budget": C_BUDGET,
                               "detail_columns": "t2: stated RHS; the1_C: |Lf-f|; "
                                                 "weighted_rate: Omega"}
    return Output(meta, ["check", "x", "lhs", "rhs", "holds", "detail"], rows, failed)


def cmd_statconv(args) -> Output:
    rep = run_statconv(args.schedule, args.N, args.eps, args.p)
    rows = rep.rows()
    meta = _base_meta(args) | {
        "squares_with_abs_q_minus_1_ge_half": rep.squares_far_from_one,
        "q_ordinary_limit_holds": rep.q_ordinary.holds,
        "q_pow_n_limit": rep.power["a"], "q_pow_n_verdict": rep.power["label"],
        "checkpoints": ",".join(map(str, rep.q_statistical.N_list)),
    }
    return Output(meta, ["sequence", "L", "ordinary", "final_density", "verdict"], rows,
                  not rep.passed)


COMMANDS = {
    "moments": cmd_moments,
    "eval": cmd_eval,
    "voronovskaja": cmd_voronovskaja,
    "rates": cmd_rates,
    "bounds": cmd_bounds,
    "statconv": cmd_statconv,
}


# ---------------------------------------------------------------------------
# output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def render(out: Output, fmt: str) -> str:
    if fmt == "json":
        doc = {"meta": {k: _json_value(v) for k, v in out.meta.items()},
               "rows": [{k: _json_value(r.get(k)) for k in out.columns} for r in out.rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    lines = [f"# bsslab {__version__}"]
    lines += [f"# {k} = {_fmt(v)}" for k, v in out.meta.items()]
    lines.append(",".join(out.columns))
    for r in out.rows:
        lines.append(",".join(_fmt(r.get(c)) for c in out.columns))
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".bsslab-", dir=d)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argument parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bsslab",
        description="Baskakov-Schurer-Szasz operator laboratory.",
        epilog="Functions: catalog names e0 e1 e2 e3 exp_neg sin runge abs_shift(c), or an "
               "expression in t with + - * / ^ (integer powers), exp sin cos abs sqrt ln. "
               "BSL_THREADS caps worker threads.",
    )
    ap.add_argument("--version", action="version", version=f"bsslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("operator")
    g.add_argument("--variant", choices=["classical", "stancu", "king", "q"], default="classical")
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--p", type=int, default=1)
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--beta", type=float, default=0.0)
    g.add_argument("--q", type=float, default=None)
    g.add_argument("--A", type=float, default=1.0)
    g = common.add_argument_group("inputs")
    g.add_argument("--f", default=None, help="catalog name or expression in t")
    g.add_argument("--x", type=float, default=None)
    g.add_argument("--x-grid", default=None, help="start:stop:step")
    g.add_argument("--n-list", default="32,128,512,2048")
    g.add_argument("--b", type=float, default=2.0)
    g.add_argument("--gamma", type=float, default=0.0)
    g = common.add_argument_group("output")
    g.add_argument("--format", choices=["csv", "json"], default="csv")
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.add_argument("--strict", action="store_true", help="exit 4 on truncation warnings")
    g = common.add_argument_group("numerics")
    g.add_argument("--quad-order", type=int, default=32)
    g.add_argument("--series-tol", type=float, default=1e-12)
    g.add_argument("--k-max", type=int, default=200_000)
    g.add_argument("--tol", type=float, default=None,
                   help="moments: discrepancy tolerance (default 1e-8, q variant 1e-6)")

    helps = {
        "moments": "closed-form vs evaluated moments",
        "eval": "evaluate an operator on an x grid",
        "voronovskaja": "scaled errors n(Lf - f) against the asymptotic limit",
        "rates": "weighted Korovkin norms and sup errors along n",
        "bounds": "error-bound inequality checks",
        "statconv": "statistical convergence of the q-moment sequences",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, parents=[common], help=h, description=h)
        if name == "statconv":
            p.add_argument("--schedule", choices=sorted(SCHEDULES), default="square-perturbed")
            p.add_argument("--N", type=int, default=100_000)
            p.add_argument("--eps", type=float, default=0.05)
        p.set_defaults(func=COMMANDS[name])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("eval", "voronovskaja", "bounds") and not args.f:
        ap.error(f"{args.command} needs --f")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        try:
            out = args.func(args)
        except (InputError, DomainError, ParseError, GrowthError, KeyError, ValueError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            print(f"bsslab {args.command}: error: {msg}", file=sys.stderr)
            return EXIT_INPUT
    truncations = [w for w in caught if issubclass(w.category, TruncationWarning)]
    for w in caught:
        print(f"bsslab {args.command}: warning: {w.message}", file=sys.stderr)
    if truncations and args.strict:
        print(f"bsslab {args.command}: {len(truncations)} truncation warning(s) under --strict",
              file=sys.stderr)
        return EXIT_TRUNCATION
    text = render(out, args.format)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if out.failed:
        print(f"bsslab {args.command}: check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
