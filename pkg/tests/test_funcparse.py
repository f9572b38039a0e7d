import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from bsslab.funcparse import (
    FuncExpr,
    Growth,
    GrowthError,
    ParseError,
    catalog,
    parse,
    parse_tree,
    resolve,
    to_source,
)

CATALOG = ["e0", "e1", "e2", "e3", "exp_neg", "sin", "runge", "abs_shift(1.5)"]


def _central(f, t, h=1e-4):
    return (f(t + h) - f(t - h)) / (2 * h)


class TestParseExamples:
    def test_square(self):
        f = parse("t^2")
        assert f(3.0) == 9.0
        assert f.d1(3.0) == 6.0
        assert f.growth == Growth("poly", 2.0)
        assert f.poly == (0.0, 0.0, 1.0)

    def test_exp_neg(self):
        f = parse("exp(-t)")
        assert f.growth.kind in ("bounded", "exp_decay")
        assert f.d2(0.7) == pytest.approx(math.exp(-0.7), rel=1e-14)

    def test_syntax_error_offset(self):
        with pytest.raises(ParseError) as info:
            parse("t*(")
        assert info.value.offset == 3

    @pytest.mark.parametrize("src,offset", [("t + * 2", 4), ("2 $ t", 2), ("sin t", 4),
                                            ("t^0.5", 2), ("foo(t)", 0)])
    def test_error_positions(self, src, offset):
        with pytest.raises(ParseError) as info:
            parse(src)
        assert info.value.offset == offset

    @pytest.mark.parametrize("src", ["exp(t)", "exp(2*t)+1", "t*exp(t^2)", "exp(sin(t))*exp(t)"])
    def test_exponential_growth_rejected(self, src):
        with pytest.raises(GrowthError):
            parse(src)

    @pytest.mark.parametrize("src,kind,deg", [
        ("3*t^3 - t", "poly", 3), ("1/(1+t^2)", "bounded", 0), ("sin(t)*t", "poly", 1),
        ("sqrt(t)", "poly", 0.5), ("t^2*exp(-t)", "exp_decay", 0), ("ln(1+t)", "poly", None),
    ])
    def test_growth_inference(self, src, kind, deg):
        g = parse(src).growth
        assert g.kind == kind
        if deg is not None and kind == "poly":
            assert g.degree == pytest.approx(deg)

    def test_abs_uses_finite_differences(self):
        f = parse("abs(t-1)")
        assert f.d1(2.0) == pytest.approx(1.0, rel=1e-6)
        assert f.d1(0.0) == pytest.approx(-1.0, rel=1e-6)

    def test_vectorized(self):
        f = parse("t^2 + sin(t)")
        x = np.linspace(0, 3, 7)
        np.testing.assert_allclose(f(x), x**2 + np.sin(x), rtol=1e-15)
        assert isinstance(f(1.0), float)


class TestCatalog:
    def test_constant(self):
        f = catalog("e0")
        assert f(5.0) == 1.0 and f.d1(5.0) == 0.0

    def test_e2(self):
        assert catalog("e2").d2(3.0) == 2.0

    def test_runge(self):
        f = catalog("runge")
        assert f(2.0) == pytest.approx(0.2)
        assert f.growth.kind == "bounded"

    def test_unknown(self):
        with pytest.raises(KeyError):
            catalog("nope")

    def test_resolve(self):
        assert resolve("e1")(2.0) == 2.0
        assert resolve("abs_shift(2)")(0.5) == 1.5
        assert resolve("t+1")(2.0) == 3.0

    @pytest.mark.parametrize("name", CATALOG)
    def test_derivative_consistency(self, name):
        f = catalog(name)
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.05, 8.0, 100)
        if name.startswith("abs_shift"):
            pts = pts[np.abs(pts - 1.5) > 1e-2]
        for t in pts:
            for d, g in ((f.d1, f), (f.d2, f.d1)):
                ref = _central(g, t)
                assert d(t) == pytest.approx(ref, rel=1e-6, abs=1e-7)

    @pytest.mark.parametrize("name", CATALOG)
    def test_growth_soundness(self, name):
        f = catalog(name)
        x = np.logspace(-3, 6, 400)
        deg = f.growth.degree if f.growth.kind == "poly" else 0.0
        ratio = np.abs(f(x)) / (1 + x**deg)
        assert np.all(np.isfinite(ratio)) and ratio.max() < 10


# --- parse-print-parse -------------------------------------------------------

_atoms = st.one_of(
    st.just("t"),
    st.integers(0, 9).map(str),
    st.floats(0.01, 100, allow_nan=False).map(lambda v: repr(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda a: f"({a[0]}{a[1]}{a[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "abs", "exp"]), children).map(
            lambda a: f"{a[0]}({a[1]})"),
        st.tuples(children, st.integers(0, 3)).map(lambda a: f"({a[0]})^{a[1]}"),
        children.map(lambda c: f"-{c}"),
    )


expressions = st.recursive(_atoms, _extend, max_leaves=8)


class TestRoundTrip:
    @given(expressions)
    def test_print_parse_idempotent(self, src):
        try:
            tree = parse_tree(src)
        except ParseError:
            assume(False)
        printed = to_source(tree)
        assert parse_tree(printed) == tree
        assert to_source(parse_tree(printed)) == printed

    @given(expressions, st.floats(0.0, 3.0))
    def test_printed_evaluates_same(self, src, t):
        try:
            f = parse(src)
        except (ParseError, GrowthError):
            assume(False)
        g = parse(to_source(f.tree))
        with np.errstate(all="ignore"):
            a, b = f(t), g(t)
        assert (math.isnan(a) and math.isnan(b)) or a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_funcexpr_is_immutable(self):
        f = parse("t")
        with pytest.raises(Exception):
            f.source = "x"  # type: ignore[misc]
        assert isinstance(f, FuncExpr)
