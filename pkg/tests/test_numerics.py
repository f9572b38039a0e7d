import math
import threading
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsslab.numerics import (
    RULE_CACHE,
    QuadRule,
    SeriesPolicy,
    TruncationWarning,
    gauss_laguerre,
    laguerre_block,
    log_gamma,
    log_negbin_weight,
    log_negbin_weights,
    sum_series,
)


class TestLogGamma:
    def test_examples(self):
        assert log_gamma(1) == 0.0
        assert log_gamma(5) == pytest.approx(3.1780538303479458, rel=1e-15)
        assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-15)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            log_gamma(x)

    @given(st.floats(0.5, 1e6))
    def test_against_mpmath(self, x):
        ref = float(mp.loggamma(x))
        assert abs(log_gamma(x) - ref) <= 1e-13 * max(abs(ref), 1.0)


class TestNegbinWeight:
    def test_examples(self):
        assert log_negbin_weight(0, 3, 0.0) == 0.0
        assert log_negbin_weight(2, 3, 0.0) == -math.inf
        assert log_negbin_weight(1, 2, 1.0) == pytest.approx(math.log(0.25), rel=1e-14)

    def test_partial_sums(self):
        k = np.arange(0, 400)
        total = math.fsum(np.exp(log_negbin_weights(5, 2.0, k)))
        assert abs(total - 1) < 1e-12

    @pytest.mark.parametrize("r", [2, 10, 100])
    @pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 5.0])
    def test_normalization(self, r, x):
        k = np.arange(0, 20000)
        assert abs(math.fsum(np.exp(log_negbin_weights(r, x, k))) - 1) < 1e-12

    @given(st.integers(0, 5000), st.integers(1, 500), st.floats(1e-3, 100))
    def test_scalar_matches_vector(self, k, r, x):
        a = log_negbin_weight(k, r, x)
        b = log_negbin_weights(r, x, np.array([k]))[0]
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 300), st.integers(1, 60), st.floats(1e-2, 20))
    def test_against_mpmath(self, k, r, x):
        with mp.workdps(40):
            ref = mp.log(mp.binomial(r + k - 1, k)) + k * mp.log(x) - (r + k) * mp.log1p(x)
        assert log_negbin_weight(k, r, x) == pytest.approx(float(ref), rel=1e-11, abs=1e-11)

    def test_negative_inputs(self):
        with pytest.raises(ValueError):
            log_negbin_weight(1, 2, -0.1)
        with pytest.raises(ValueError):
            log_negbin_weight(-1, 2, 0.5)


class TestGaussLaguerre:
    def test_one_point(self):
        rule = gauss_laguerre(1, 0.0)
        assert rule.nodes.tolist() == [1.0]
        assert rule.weights.tolist() == [1.0]

    def test_two_point_cubic(self):
        rule = gauss_laguerre(2, 0.0)
        assert rule.integrate(lambda t: t**3) == pytest.approx(6.0, rel=1e-14)

    def test_order32_alpha4_normalization(self):
        rule = gauss_laguerre(32, 4.0)
        assert rule.integrate(np.ones_like) == pytest.approx(24.0, rel=1e-11)

    @pytest.mark.parametrize("m", [2, 4, 8, 16, 32])
    @pytest.mark.parametrize("alpha", [0.0, 1.0, 5.0, 20.0])
    def test_exactness(self, m, alpha):
        rule = gauss_laguerre(m, alpha)
        for d in (0, m, 2 * m - 1):
            exact = math.exp(math.lgamma(alpha + d + 1))
            assert rule.integrate(lambda t: t**d) == pytest.approx(exact, rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, 3.0, 250.0, 4000.0])
    def test_invariants(self, alpha):
        rule = gauss_laguerre(64, alpha)
        assert np.all(rule.nodes > 0)
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(np.isfinite(rule.weights)) and np.all(rule.weights > 0)
        assert rule.weights.sum() == pytest.approx(1.0, rel=1e-12)

    @given(st.integers(1, 48), st.floats(0, 500))
    def test_mean_is_alpha_plus_one(self, m, alpha):
        # E[t] under the normalized Gamma(alpha+1) weight
        rule = gauss_laguerre(m, alpha)
        assert float(rule.weights @ rule.nodes) == pytest.approx(alpha + 1, rel=1e-11)

    def test_rules_are_frozen(self):
        rule = gauss_laguerre(8, 2.0)
        with pytest.raises(ValueError):
            rule.nodes[0] = 1.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            gauss_laguerre(0)
        with pytest.raises(ValueError):
            gauss_laguerre(4, -1.0)

    def test_block_matches_single(self):
        nodes, weights = laguerre_block(16, [0.0, 7.0, 31.0])
        single = gauss_laguerre(16, 7.0)
        np.testing.assert_array_equal(nodes[1], single.nodes)
        np.testing.assert_array_equal(weights[1], single.weights)

    def test_cache_is_bounded_and_thread_safe(self):
        errors = []

        def worker(offset):
            try:
                for a in range(offset, offset + 200):
                    r = gauss_laguerre(8, float(a) + 0.5)
                    assert isinstance(r, QuadRule)
            except Exception as exc:  # pragma: no cover - reported below
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i * 150,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(RULE_CACHE) <= RULE_CACHE.maxsize


class TestSumSeries:
    def test_zero(self):
        res = sum_series(lambda k: 0.0)
        assert res.value == 0.0 and res.reason == "zero" and res.converged

    def test_geometric(self):
        res = sum_series(lambda k: 0.5**k)
        assert res.value == pytest.approx(2.0, rel=1e-12)
        assert res.reason == "tolerance"

    def test_negbin_masses(self):
        res = sum_series(lambda k: math.exp(log_negbin_weight(k, 10, 1.0)))
        assert abs(res.value - 1) < 1e-12

    def test_block_mode(self):
        res = sum_series(lambda k: 0.5 ** k.astype(float), block=64)
        assert res.value == pytest.approx(2.0, rel=1e-12)

    def test_cap_is_flagged(self):
        with pytest.warns(TruncationWarning):
            res = sum_series(lambda k: 1.0 / (k + 1), SeriesPolicy(k_max=100))
        assert not res.converged and res.reason == "k_max" and res.n_terms == 100

    @given(st.floats(0.05, 0.95), st.integers(0, 20))
    def test_monotone_truncation(self, ratio, cut):
        # partial sums of nonnegative terms never exceed the converged value
        full = sum_series(lambda k: ratio**k).value
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            part = sum_series(lambda k: ratio**k, SeriesPolicy(k_max=cut + 1)).value
        assert part <= full * (1 + 1e-15)

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            SeriesPolicy(rel_tol=0)
        with pytest.raises(ValueError):
            SeriesPolicy(k_max=0)
