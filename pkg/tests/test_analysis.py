import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsslab.analysis import (
    C_BUDGET,
    ModulusKind,
    bound_check_theorem_the1,
    bound_check_theorem_t2,
    bound_check_weighted_rate,
    korovkin_norms,
    log_grid,
    loglog_slope,
    modulus,
    q_voronovskaja_run,
    voronovskaja_run,
    weighted_modulus,
    weighted_norm,
)
from bsslab.funcparse import FuncExpr, catalog, parse
from bsslab.operators import OperatorSpec, Variant, classical_central_moments

C = Variant.CLASSICAL
S = Variant.STANCU

smooth_names = st.sampled_from(["e1", "e2", "exp_neg", "sin", "runge", "abs_shift(2)"])


class TestModulus:
    def test_linear_first_order(self):
        est = modulus(lambda x: x, 0.3, "omega1")
        assert est.value == pytest.approx(0.3, rel=1e-12)
        assert est.kind is ModulusKind.OMEGA1 and est.grid_resolution == pytest.approx(0.3 / 16)

    def test_linear_second_order_vanishes(self):
        assert modulus(lambda x: 2 * x + 1, 0.5, "omega2").value == pytest.approx(0.0, abs=1e-12)

    def test_square_second_order(self):
        d = 0.25
        assert modulus(lambda x: x * x, d, "omega2", (0, 10)).value == pytest.approx(2 * d * d, rel=1e-10)

    def test_omega_b_stays_in_domain(self):
        # f jumps outside [0, 3] only; the restricted modulus never sees it
        f = lambda x: np.where(np.asarray(x) > 3.0, 100.0, np.asarray(x, dtype=float))
        assert modulus(f, 0.5, "omega_b", (0, 3)).value == pytest.approx(0.5, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            modulus(lambda x: x, 0.0)
        with pytest.raises(ValueError):
            modulus(lambda x: x, 0.1, "omega1", (2, 1))
        with pytest.raises(ValueError):
            modulus(lambda x: x, 0.1, "omega_weighted")

    @settings(max_examples=30)
    @given(smooth_names, st.floats(0.01, 2.0), st.floats(1.0, 3.0),
           st.sampled_from(["omega1", "omega2"]))
    def test_monotone_in_delta(self, name, d, lam, kind):
        f = catalog(name)
        a = modulus(f, d, kind, (0, 10)).value
        b = modulus(f, lam * d, kind, (0, 10)).value
        # the grids differ, so allow the resolution slack of a first-order step
        slack = modulus(f, d / 16, "omega1", (0, 10)).value if lam > 1 else 0.0
        assert a <= b + slack + 1e-12

    @settings(max_examples=30)
    @given(smooth_names, st.floats(0.01, 1.0), st.integers(1, 4))
    def test_first_order_subadditive(self, name, d, lam):
        f = catalog(name)
        a = modulus(f, d, "omega1", (0, 10)).value
        b = modulus(f, lam * d, "omega1", (0, 10)).value
        assert b <= (lam + 1) * a + 1e-6


class TestWeightedModulus:
    def test_constant(self):
        assert weighted_modulus(lambda x: np.full_like(x, 3.0), 0.5, 1.0).value == 0.0

    @pytest.mark.parametrize("name", ["e2", "sin", "runge", "exp_neg"])
    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_bounded_by_twice_norm(self, name, gamma):
        f = catalog(name)
        norm = weighted_norm(f, "rho_gamma", gamma, x_max=50.0, per_decade=256).norm_value
        assert weighted_modulus(f, 0.7, gamma).value <= 2 * norm + 1e-6

    @settings(max_examples=30)
    @given(smooth_names, st.floats(0.01, 1.0), st.floats(0, 2))
    def test_doubling(self, name, d, gamma):
        f = catalog(name)
        a = weighted_modulus(f, d, gamma).value
        b = weighted_modulus(f, 2 * d, gamma).value
        assert b <= 3 * a + 1e-6

    def test_validation(self):
        with pytest.raises(ValueError):
            weighted_modulus(lambda x: x, -1.0)
        with pytest.raises(ValueError):
            weighted_modulus(lambda x: x, 1.0, gamma=-0.5)


class TestWeightedNorm:
    def test_zero(self):
        assert weighted_norm(lambda x: x - x).norm_value == 0.0

    def test_constant(self):
        res = weighted_norm(lambda x: np.full_like(x, 1 / 11))
        assert res.norm_value == pytest.approx(1 / 11, rel=1e-15) and res.argmax == 0.0

    def test_peak_at_one(self):
        res = weighted_norm(lambda x: x)
        assert res.norm_value == pytest.approx(0.5, rel=1e-14) and res.argmax == 1.0

    def test_rho_gamma(self):
        res = weighted_norm(lambda x: x**3, "rho_gamma", 1.0, x_max=1e3)
        assert res.norm_value == pytest.approx(1e9 / (1 + 1e9), rel=1e-12)

    def test_grid(self):
        g = log_grid(1e3)
        assert g[0] == 0.0 and g[1] == pytest.approx(1e-6) and g[-1] == pytest.approx(1e3)
        assert np.all(np.diff(g) > 0) and len(g) == 1 + 9 * 64 + 1

    def test_validation(self):
        with pytest.raises(ValueError):
            weighted_norm(lambda x: x, "nope")
        with pytest.raises(ValueError):
            weighted_norm(lambda x: x, x_max=0)

    def test_korovkin_monotone_in_n(self):
        prev = None
        for n in (10, 100, 1000, 10_000):
            cur = korovkin_norms(OperatorSpec(C, n, 1))
            if prev:
                assert all(cur[r] <= prev[r] + 1e-15 for r in range(3))
            prev = cur
        assert prev[0] == 0.0 and max(prev.values()) < 1e-3


class TestVoronovskaja:
    def test_e2_exact_finite_n(self):
        x, p = 1.5, 2
        recs = voronovskaja_run(OperatorSpec(C, 10, p), catalog("e2"), x, [10, 40, 160], threads=1)
        for r in recs:
            m = r.n + p
            assert r.scaled_error == pytest.approx(r.n * (x * x / m + 4 * x / m + 2 / m**2), rel=1e-9)
            assert r.target == pytest.approx(x * x + 4 * x)
            assert r.abs_gap == pytest.approx(abs(r.scaled_error - r.target))

    def test_e1(self):
        recs = voronovskaja_run(OperatorSpec(C, 1, 1), catalog("e1"), 1.0, [1000, 10, 100])
        assert [r.n for r in recs] == [10, 100, 1000]
        for r in recs:
            # n (L f - f) amplifies the quadrature error by n
            assert r.scaled_error == pytest.approx(r.n / (r.n + 1), rel=1e-7)
            assert r.target == 1.0

    def test_e0(self):
        recs = voronovskaja_run(OperatorSpec(C, 5, 1), catalog("e0"), 2.0, [8, 16])
        assert all(abs(r.scaled_error) < 1e-8 and r.target == 0.0 for r in recs)

    def test_threads_do_not_change_results(self):
        spec = OperatorSpec(C, 5, 1)
        a = voronovskaja_run(spec, catalog("runge"), 1.0, [32, 64, 128], threads=1)
        b = voronovskaja_run(spec, catalog("runge"), 1.0, [32, 64, 128], threads=3)
        assert a == b

    def test_slope(self):
        recs = voronovskaja_run(OperatorSpec(C, 5, 1), catalog("exp_neg"), 1.0, [32, 128, 512, 2048])
        assert -1.3 <= loglog_slope(recs) <= -0.7

    def test_requires_derivatives(self):
        g = FuncExpr(lambda t: t)
        with pytest.raises(ValueError, match="catalog"):
            voronovskaja_run(OperatorSpec(C, 5, 1), g, 1.0, [10])

    def test_classical_only(self):
        with pytest.raises(ValueError):
            voronovskaja_run(OperatorSpec(S, 5, 1, 1, 2), catalog("e1"), 1.0, [10])


class TestQVoronovskaja:
    def test_e0_zero(self):
        recs = q_voronovskaja_run(catalog("e0"), 1.0, [8, 16, 32])
        assert all(abs(r.scaled_error) < 1e-8 for r in recs)

    def test_e1_monotone(self):
        recs = q_voronovskaja_run(catalog("e1"), 1.0, [32, 64, 128, 256])
        gaps = [r.abs_gap for r in recs]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert recs[0].q == pytest.approx(1 - 1 / 32**2)

    def test_e2_printed_target(self):
        recs = q_voronovskaja_run(catalog("e2"), 1.0, [32, 64, 128])
        assert all(r.target == 4.0 for r in recs)
        gaps = [r.abs_gap for r in recs]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_e2_moment_target_converges(self):
        recs = q_voronovskaja_run(catalog("e2"), 1.0, [32, 128, 512], target_rule="moments")
        assert recs[0].target == 5.0
        assert recs[-1].abs_gap < 0.01

    def test_bad_rule(self):
        with pytest.raises(ValueError):
            q_voronovskaja_run(catalog("e1"), 1.0, [8], target_rule="other")


class TestBoundChecks:
    def test_t2_constant(self):
        rep = bound_check_theorem_t2(catalog("e0"), OperatorSpec(C, 10, 1), 2.0)
        assert rep.lhs == pytest.approx(0.0, abs=1e-10) and rep.holds

    def test_t2_example(self):
        rep = bound_check_theorem_t2(catalog("exp_neg"), OperatorSpec(C, 50, 1), 2.0)
        assert rep.holds and rep.lhs <= rep.components["rhs_proven"]
        assert rep.components["N_f"] == pytest.approx(6 * rep.components["M_f"])

    def test_delta_monotone_in_n(self):
        assert classical_central_moments(100, 1, 3.0)[1] < classical_central_moments(10, 1, 3.0)[1]

    def test_t2_stancu_rejected(self):
        with pytest.raises(ValueError):
            bound_check_theorem_t2(catalog("sin"), OperatorSpec(S, 10, 1, 1, 2), 1.0)

    def test_the1_linear(self):
        f = parse("2*t + 1")
        rep = bound_check_theorem_the1(f, OperatorSpec(C, 10, 1), 1.0)
        c = rep.components
        assert c["omega2_term"] == pytest.approx(0.0, abs=1e-12)
        assert rep.lhs == 0.0 and not c["exceptional"]
        assert c["abs_error"] - c["omega_alpha"] <= 1e-10

    def test_the1_constant(self):
        rep = bound_check_theorem_the1(catalog("e0"), OperatorSpec(C, 10, 1), 1.0)
        assert rep.components["abs_error"] < 1e-12

    def test_the1_sin(self):
        rep = bound_check_theorem_the1(catalog("sin"), OperatorSpec(C, 20, 2), 1.0)
        assert math.isfinite(rep.lhs) and rep.lhs < C_BUDGET and rep.holds

    @pytest.mark.parametrize("spec", [OperatorSpec(C, 20, 1), OperatorSpec(S, 20, 2, 1.0, 2.0)])
    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_weighted_rate(self, spec, gamma):
        rep = bound_check_weighted_rate(catalog("sin"), spec, 1.5, gamma)
        assert rep.holds and rep.components["L_nu2"] > 0

    def test_ratio(self):
        rep = bound_check_theorem_t2(catalog("runge"), OperatorSpec(C, 10, 1), 1.0)
        assert rep.ratio == pytest.approx(rep.lhs / rep.rhs)
