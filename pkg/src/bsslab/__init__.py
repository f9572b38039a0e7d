"""Numerical laboratory for Baskakov-Schurer-Szasz type positive linear operators."""

__version__ = "0.1.0"

from .funcparse import FuncExpr, catalog, parse, resolve  # noqa: E402
from .numerics import EvalPolicy, SeriesPolicy, TruncationWarning, gauss_laguerre  # noqa: E402
from .operators import (  # noqa: E402
    DomainError,
    MomentReport,
    OperatorSpec,
    Variant,
    closed_moments,
    evaluate,
)
from .qcalc import QContext, QOperatorSpec, q_evaluate, q_moments  # noqa: E402

__all__ = [
    "DomainError",
    "EvalPolicy",
    "FuncExpr",
    "MomentReport",
    "OperatorSpec",
    "QContext",
    "QOperatorSpec",
    "SeriesPolicy",
    "TruncationWarning",
    "Variant",
    "catalog",
    "closed_moments",
    "evaluate",
    "gauss_laguerre",
    "parse",
    "q_evaluate",
    "q_moments",
    "resolve",
]
