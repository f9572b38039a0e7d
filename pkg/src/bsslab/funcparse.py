"""Test functions for the operators: a tiny expression language plus a catalog.

Grammar (one variable, ``t``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # exponent must fold to an integer constant
    atom   := NUMBER | 't' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := exp | sin | cos | abs | sqrt | ln

``parse`` builds a syntax tree, differentiates it symbolically (``abs`` falls
back to central differences), and infers a growth class used by the
operator evaluators.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "FuncExpr",
    "Growth",
    "GrowthError",
    "ParseError",
    "catalog",
    "parse",
    "parse_tree",
    "resolve",
    "to_source",
]

FUNCTIONS = ("exp", "sin", "cos", "abs", "sqrt", "ln")
CATALOG_NAMES = ("e0", "e1", "e2", "e3", "exp_neg", "sin", "abs_shift", "runge")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class GrowthError(ValueError):
    """Expression grows too fast for the operators' integrals to exist."""


@dataclass(frozen=True)
class Growth:
    kind: str  # "bounded" | "poly" | "exp_decay"
    degree: float = 0.0

    @staticmethod
    def poly(degree: float) -> "Growth":
        return Growth("bounded", 0.0) if degree <= 0 else Growth("poly", float(degree))

    def __str__(self):
        return f"poly({self.degree:g})" if self.kind == "poly" else self.kind


@dataclass(frozen=True)
class FuncExpr:
    """A target function with optional derivatives and growth metadata.

    ``evaluate``, ``d1`` and ``d2`` accept scalars or numpy arrays.
    ``poly`` holds ascending coefficients when the function is a polynomial.
    """

    evaluate: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    growth: Growth = Growth("bounded")
    source: str = ""
    poly: Optional[tuple] = None
    tree: object = field(default=None, compare=False, repr=False)

    def __call__(self, t):
        return self.evaluate(t)

    @property
    def has_derivatives(self) -> bool:
        return self.d1 is not None and self.d2 is not None


# ---------------------------------------------------------------------------
# syntax tree

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            offset = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[offset]!r}", offset)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            arg = self.unary()
            if text == "+":
                return arg
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            pos = self.take()[2]
            exp = _fold(self.unary())
            if not isinstance(exp, Num) or exp.value != int(exp.value):
                raise ParseError("exponent must be an integer constant", pos + 1)
            return Pow(base, int(exp.value))
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "t":
                return Var()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise ParseError(f"unknown name {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected {text!r}", pos)


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node) -> int:
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    if isinstance(node, Num) and node.value < 0:
        return 3
    return 5


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(node) -> str:
    """Render a tree back to grammar text (parse(to_source(x)) == x)."""
    if isinstance(node, Num):
        s = _fmt_num(node.value)
        return s
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Call):
        return f"{node.name}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < 4:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) < 5:
            base = f"({base})"
        exp = str(node.exp) if node.exp >= 0 else f"({node.exp})"
        return f"{base}^{exp}"
    p = _PREC[node.op]
    left = to_source(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_source(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left}{node.op}{right}"


# ---------------------------------------------------------------------------
# folding, differentiation, evaluation

def _fold(node):
    if isinstance(node, Neg):
        arg = _fold(node.arg)
        if isinstance(arg, Num):
            return Num(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(node, Pow):
        base = _fold(node.base)
        if node.exp == 0:
            return Num(1.0)
        if node.exp == 1:
            return base
        if isinstance(base, Num) and not (base.value == 0 and node.exp < 0):
            return Num(base.value ** node.exp)
        return Pow(base, node.exp)
    if isinstance(node, Call):
        return Call(node.name, _fold(node.arg))
    if not isinstance(node, Bin):
        return node
    a, b = _fold(node.left), _fold(node.right)
    op = node.op
    if isinstance(a, Num) and isinstance(b, Num) and not (op == "/" and b.value == 0):
        return Num({"+": a.value + b.value, "-": a.value - b.value,
                    "*": a.value * b.value, "/": a.value / b.value if b.value else 0}[op])
    if op == "+":
        if a == Num(0.0):
            return b
        if b == Num(0.0):
            return a
    if op == "-":
        if b == Num(0.0):
            return a
        if a == Num(0.0):
            return _fold(Neg(b))
    if op == "*":
        if a == Num(0.0) or b == Num(0.0):
            return Num(0.0)
        if a == Num(1.0):
            return b
        if b == Num(1.0):
            return a
    if op == "/":
        if a == Num(0.0):
            return Num(0.0)
        if b == Num(1.0):
            return a
    return Bin(op, a, b)


class _NoClosedForm(Exception):
    pass


def _diff(node):
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Neg):
        return Neg(_diff(node.arg))
    if isinstance(node, Bin):
        a, b = node.left, node.right
        da, db = _diff(a), _diff(b)
        if node.op in "+-":
            return Bin(node.op, da, db)
        if node.op == "*":
            return Bin("+", Bin("*", da, b), Bin("*", a, db))
        return Bin("/", Bin("-", Bin("*", da, b), Bin("*", a, db)), Pow(b, 2))
    if isinstance(node, Pow):
        return Bin("*", Bin("*", Num(float(node.exp)), Pow(node.base, node.exp - 1)),
                   _diff(node.base))
    u, du = node.arg, _diff(node.arg)
    if node.name == "exp":
        outer = node
    elif node.name == "sin":
        outer = Call("cos", u)
    elif node.name == "cos":
        outer = Neg(Call("sin", u))
    elif node.name == "ln":
        return Bin("/", du, u)
    elif node.name == "sqrt":
        return Bin("/", du, Bin("*", Num(2.0), node))
    else:  # abs: kink, no closed form
        raise _NoClosedForm(node.name)
    return Bin("*", outer, du)


_UFUNC = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs,
          "sqrt": np.sqrt, "ln": np.log}


def _compile(node) -> Callable:
    if isinstance(node, Num):
        v = node.value
        return lambda t: np.zeros_like(t) + v if isinstance(t, np.ndarray) else v
    if isinstance(node, Var):
        return lambda t: t
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda t: -f(t)
    if isinstance(node, Pow):
        f, k = _compile(node.base), node.exp
        if k < 0:
            return lambda t: 1.0 / f(t) ** (-k)
        return lambda t: f(t) ** k
    if isinstance(node, Call):
        f, g = _compile(node.arg), _UFUNC[node.name]
        return lambda t: g(f(t))
    f, g = _compile(node.left), _compile(node.right)
    if node.op == "+":
        return lambda t: f(t) + g(t)
    if node.op == "-":
        return lambda t: f(t) - g(t)
    if node.op == "*":
        return lambda t: f(t) * g(t)
    return lambda t: f(t) / g(t)


def _vectorized(fn: Callable) -> Callable:
    def call(t):
        scalar = np.ndim(t) == 0
        with np.errstate(all="ignore"):
            out = fn(np.asarray(t, dtype=float))
        out = np.asarray(out, dtype=float)
        if scalar:
            return float(out)
        return np.broadcast_to(out, np.shape(t)).copy() if out.shape != np.shape(t) else out
    return call


def _fd1(f: Callable) -> Callable:
    def d(t):
        t = np.asarray(t, dtype=float)
        h = 1e-5 * np.maximum(1.0, np.abs(t))
        out = (f(t + h) - f(t - h)) / (2 * h)
        return float(out) if out.ndim == 0 else out
    return d


def _fd2(f: Callable) -> Callable:
    def d(t):
        t = np.asarray(t, dtype=float)
        h = 1e-4 * np.maximum(1.0, np.abs(t))
        out = (f(t + h) - 2 * f(t) + f(t - h)) / (h * h)
        return float(out) if out.ndim == 0 else out
    return d


# ---------------------------------------------------------------------------
# polynomial extraction and growth inference

def _poly_add(a, b, sign=1.0):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0.0) + sign * (b[i] if i < len(b) else 0.0)
            for i in range(n)]


def _poly_mul(a, b):
    out = [0.0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _trim(c):
    c = list(c)
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return c


def _as_poly(node):
    """Ascending coefficients if ``node`` is a polynomial in t, else None."""
    if isinstance(node, Num):
        return [node.value]
    if isinstance(node, Var):
        return [0.0, 1.0]
    if isinstance(node, Neg):
        p = _as_poly(node.arg)
        return None if p is None else [-c for c in p]
    if isinstance(node, Pow):
        p = _as_poly(node.base)
        if p is None or node.exp < 0:
            return None
        out = [1.0]
        for _ in range(node.exp):
            out = _poly_mul(out, p)
        return _trim(out)
    if isinstance(node, Bin):
        a, b = _as_poly(node.left), _as_poly(node.right)
        if a is None or b is None:
            return None
        if node.op == "+":
            return _trim(_poly_add(a, b))
        if node.op == "-":
            return _trim(_poly_add(a, b, -1.0))
        if node.op == "*":
            return _trim(_poly_mul(a, b))
        b = _trim(b)
        if len(b) == 1 and b[0] != 0:
            return _trim([c / b[0] for c in a])
        return None
    return None


@dataclass(frozen=True)
class _Asym:
    """Behaviour as t -> inf: |u| = O(t**deg), or exponential decay/growth.

    ``sign`` is +1/-1 when u -> +/-inf, 0 when bounded or unknown.
    """

    deg: float
    sign: int = 0
    decay: bool = False  # exponentially decaying
    blowup: bool = False  # exponentially growing


def _asym(node) -> _Asym:
    p = _as_poly(node)
    if p is not None:
        p = _trim(p)
        d = len(p) - 1
        if d == 0:
            return _Asym(0.0, 0)
        return _Asym(float(d), 1 if p[-1] > 0 else -1)
    if isinstance(node, Neg):
        a = _asym(node.arg)
        return _Asym(a.deg, -a.sign, a.decay, a.blowup)
    if isinstance(node, Pow):
        a = _asym(node.base)
        k = node.exp
        if k > 0:
            sign = a.sign if k % 2 else (1 if a.sign else 0)
            return _Asym(a.deg * k, sign, a.decay, a.blowup)
        return _recip(a, -k)
    if isinstance(node, Call):
        a = _asym(node.arg)
        if node.name in ("sin", "cos"):
            return _Asym(0.0)
        if node.name == "abs":
            return _Asym(a.deg, 1 if a.sign else 0, a.decay, a.blowup)
        if node.name == "sqrt":
            return _Asym(a.deg / 2, 1 if a.sign > 0 else 0, a.decay, a.blowup)
        if node.name == "ln":
            if a.blowup:
                return _Asym(a.deg if a.deg > 0 else 1.0, 1)
            return _Asym(1.0 if a.deg > 0 else 0.0, 1 if a.sign > 0 else 0)
        # exp
        if a.blowup or a.sign > 0:
            return _Asym(0.0, 1, blowup=True)
        if a.sign < 0 and a.deg > 0:
            return _Asym(0.0, 0, decay=True)
        if a.deg == 0 and not a.blowup:
            return _Asym(0.0)
        return _Asym(0.0, 1, blowup=True)  # unknown sign of an unbounded argument
    a, b = _asym(node.left), _asym(node.right)
    if node.op in "+-":
        if a.blowup or b.blowup:
            return _Asym(0.0, 1, blowup=True)
        if a.decay and b.decay:
            return _Asym(0.0, 0, decay=True)
        bs = b.sign if node.op == "+" else -b.sign
        if a.deg > b.deg:
            return _Asym(a.deg, a.sign)
        if b.deg > a.deg:
            return _Asym(b.deg, bs)
        return _Asym(a.deg, a.sign if a.sign == bs else 0)
    if node.op == "*":
        if a.blowup or b.blowup:
            if (a.decay or b.decay):
                return _Asym(0.0, 1, blowup=True)  # undecidable, refuse
            return _Asym(0.0, 1, blowup=True)
        if a.decay or b.decay:
            return _Asym(0.0, 0, decay=True)
        return _Asym(a.deg + b.deg, a.sign * b.sign)
    # division
    if b.blowup:
        return _Asym(0.0, 0, decay=not a.blowup) if not a.blowup else _Asym(0.0, 1, blowup=True)
    if b.decay:
        return _Asym(0.0, 1, blowup=True)
    if a.blowup:
        return _Asym(0.0, 1, blowup=True)
    if a.decay:
        return _Asym(0.0, 0, decay=True)
    return _Asym(max(a.deg - b.deg, 0.0), a.sign * b.sign if a.deg > b.deg else 0)


def _recip(a: _Asym, k: int) -> _Asym:
    if a.blowup:
        return _Asym(0.0, 0, decay=True)
    if a.decay:
        return _Asym(0.0, 1, blowup=True)
    return _Asym(0.0, 0)  # 1/u^k with u -> inf or bounded away from 0 is bounded


def _growth_of(node) -> Growth:
    a = _asym(node)
    if a.blowup:
        raise GrowthError(
            f"expression {to_source(node)!r} grows exponentially; the operators' "
            "integrals diverge for such f"
        )
    if a.decay:
        return Growth("exp_decay", 0.0)
    return Growth.poly(a.deg)


# ---------------------------------------------------------------------------
# public API

def _from_tree(tree, source: str) -> FuncExpr:
    f = _vectorized(_compile(tree))
    try:
        dtree = _fold(_diff(tree))
        d1 = _vectorized(_compile(dtree))
        try:
            d2 = _vectorized(_compile(_fold(_diff(dtree))))
        except _NoClosedForm:
            d2 = _fd1(d1)
    except _NoClosedForm:
        d1, d2 = _fd1(f), _fd2(f)
    poly = _as_poly(tree)
    return FuncExpr(f, d1, d2, _growth_of(tree), source,
                    tuple(_trim(poly)) if poly is not None else None, tree)


def parse(src: str) -> FuncExpr:
    """Parse an expression in t into a :class:`FuncExpr`.

    Raises :class:`ParseError` (with ``offset``) on bad syntax and
    :class:`GrowthError` for exponentially growing expressions.
    """
    tree = _fold(_Parser(src).parse())
    return _from_tree(tree, src)


def parse_tree(src: str):
    return _fold(_Parser(src).parse())


def _poly_func(coeffs, source: str, growth: Growth | None = None) -> FuncExpr:
    c = list(coeffs)
    d1c = [i * c[i] for i in range(1, len(c))] or [0.0]
    d2c = [i * d1c[i] for i in range(1, len(d1c))] or [0.0]

    def ev(cs):
        rev = list(reversed(cs))
        return _vectorized(lambda t: np.polyval(rev, t))

    deg = len(_trim(c)) - 1
    return FuncExpr(ev(c), ev(d1c), ev(d2c), growth or Growth.poly(deg), source,
                    tuple(float(x) for x in c))


def catalog(name: str, c: float | None = None) -> FuncExpr:
    """Built-in test functions with exact first and second derivatives.

    ``abs_shift`` takes its kink location either as ``c`` or inline,
    e.g. ``"abs_shift(1.5)"``.
    """
    m = re.fullmatch(r"\s*abs_shift\s*\(\s*([^)]*)\)\s*", name)
    if m:
        name, c = "abs_shift", float(m.group(1))
    name = name.strip()
    if name in ("e0", "e1", "e2", "e3"):
        k = int(name[1])
        return _poly_func([0.0] * k + [1.0], name)
    if name == "exp_neg":
        return FuncExpr(_vectorized(lambda t: np.exp(-t)), _vectorized(lambda t: -np.exp(-t)),
                        _vectorized(lambda t: np.exp(-t)), Growth("exp_decay"), name)
    if name == "sin":
        return FuncExpr(_vectorized(np.sin), _vectorized(np.cos),
                        _vectorized(lambda t: -np.sin(t)), Growth("bounded"), name)
    if name == "runge":
        return FuncExpr(
            _vectorized(lambda t: 1.0 / (1.0 + t * t)),
            _vectorized(lambda t: -2.0 * t / (1.0 + t * t) ** 2),
            _vectorized(lambda t: (6.0 * t * t - 2.0) / (1.0 + t * t) ** 3),
            Growth("bounded"), name,
        )
    if name == "abs_shift":
        c = 1.0 if c is None else float(c)
        return FuncExpr(
            _vectorized(lambda t: np.abs(t - c)),
            _vectorized(lambda t: np.sign(t - c)),
            _vectorized(lambda t: np.zeros_like(t)),
            Growth("poly", 1.0), f"abs_shift({c:g})",
        )
    raise KeyError(f"unknown catalog function {name!r}; choose from {', '.join(CATALOG_NAMES)}")


def resolve(spec: str) -> FuncExpr:
    """Catalog name if ``spec`` names one, otherwise parse it as an expression."""
    key = spec.strip()
    if key in CATALOG_NAMES or key.startswith("abs_shift"):
        return catalog(key)
    return parse(spec)
