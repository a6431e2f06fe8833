import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treqcg.predictor import (
    PredictorInputs,
    binom_pmf,
    binom_tail,
    expected_clusters,
    step_probability,
    suggest_beta,
)


def brute_pmf(n, k, p):
    return math.comb(n, k) * p**k * (1 - p) ** (n - k)


class TestInputs:
    def test_derived_quantities(self):
        inp = PredictorInputs(1000, 100, 10**6, alpha=0.5, beta=0.95)
        assert inp.overlap_len == 75  # (1+0.5)/2 * 100
        assert inp.max_mismatches == 3  # floor(0.05 * 75)

    def test_rounding_of_overlap_len(self):
        inp = PredictorInputs(10, 101, 10**6, alpha=0.5)
        assert inp.overlap_len == round(0.75 * 101)

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            PredictorInputs(10, 100, 1000, epsilon=1.0)
        with pytest.raises(ValueError):
            PredictorInputs(10, 100, 1000, epsilon=-0.1)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            PredictorInputs(10, 100, 1000, alpha=0.4)


class TestBinomials:
    def test_pmf_p_zero(self):
        assert binom_pmf(10, 0, 0.0) == 1.0
        assert binom_pmf(10, 3, 0.0) == 0.0

    def test_pmf_half(self):
        assert binom_pmf(4, 2, 0.5) == pytest.approx(0.375)

    def test_tail_at_zero_is_one(self):
        for p in (0.0, 0.01, 0.5, 0.99):
            assert binom_tail(50, 0, p) == 1.0

    def test_tail_beyond_support(self):
        assert binom_tail(5, 6, 0.3) == 0.0

    @given(
        st.integers(1, 60),
        st.integers(0, 60),
        st.floats(0.001, 0.999),
    )
    @settings(max_examples=200, deadline=None)
    def test_against_direct_arithmetic(self, n, k, p):
        k = min(k, n)
        assert binom_pmf(n, k, p) == pytest.approx(brute_pmf(n, k, p), rel=1e-9)
        direct_tail = sum(brute_pmf(n, j, p) for j in range(k, n + 1))
        assert binom_tail(n, k, p) == pytest.approx(direct_tail, rel=1e-9, abs=1e-300)

    def test_log_space_survives_extreme_tails(self):
        # a naive product would underflow to 0 long before this
        v = binom_pmf(75, 75, 0.01)
        assert 0 < v < 1e-140
        assert math.log(v) == pytest.approx(75 * math.log(0.01), rel=1e-12)


class TestStepProbability:
    def test_no_candidates_is_certain_anchor(self):
        inp = PredictorInputs(10, 100, 10**6, epsilon=0.03)
        assert step_probability(0.0, inp) == 1.0

    def test_zero_error_with_candidates(self):
        inp = PredictorInputs(10, 100, 10**4, epsilon=0.0)
        # pmf(l',0,0)=1 and tail^c -> 0^c = 0 for c>0; remaining tail term 0
        assert step_probability(5000.0, inp) == 0.0

    def test_formula_direct(self):
        # a candidate fails exactly when its own errors push the total past
        # the allowed maximum m: threshold m + 1 - x
        inp = PredictorInputs(10, 100, 10**6, alpha=0.5, beta=0.95, epsilon=0.03)
        lp, m, eps = inp.overlap_len, inp.max_mismatches, inp.epsilon
        t_prev = 500.0
        c = 2 * (1 - inp.alpha) * inp.read_len / inp.genome_len * t_prev
        expect = sum(
            brute_pmf(lp, x, eps) * binom_tail(lp, m + 1 - x, eps) ** c
            for x in range(m + 1)
        ) + binom_tail(lp, m + 1, eps)
        assert step_probability(t_prev, inp) == pytest.approx(expect, rel=1e-12)

    def test_monotone_in_t_prev(self):
        inp = PredictorInputs(10, 100, 10**6, epsilon=0.03)
        vals = [step_probability(t, inp) for t in (0, 10, 100, 1000, 10000)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_negative_t_prev_rejected(self):
        inp = PredictorInputs(10, 100, 10**6)
        with pytest.raises(ValueError):
            step_probability(-1.0, inp)

    def test_m_zero_still_admits_exact_joins(self):
        # beta = 1 allows zero mismatches; an error-free read can still join
        inp = PredictorInputs(10, 100, 10**6, beta=1.0, epsilon=0.03)
        assert inp.max_mismatches == 0
        lp = inp.overlap_len
        c = 2 * (1 - inp.alpha) * inp.read_len / inp.genome_len * 100.0
        expect = brute_pmf(lp, 0, 0.03) * binom_tail(lp, 1, 0.03) ** c + binom_tail(
            lp, 1, 0.03
        )
        assert step_probability(100.0, inp) == pytest.approx(expect, rel=1e-12)


class TestExpectedClusters:
    def test_first_step(self):
        inp = PredictorInputs(1, 100, 10**6, epsilon=0.03)
        fc = expected_clusters(inp)
        assert fc.t.tolist() == [0.0, 1.0]
        assert fc.total == 1.0

    def test_recurrence_matches_step_probability(self):
        inp = PredictorInputs(50, 100, 10**5, epsilon=0.04)
        fc = expected_clusters(inp)
        t = 1.0
        for i in range(2, 51):
            p = step_probability(t, inp)
            t += p
            assert fc.p[i] == pytest.approx(p, rel=1e-12)
            assert fc.t[i] == pytest.approx(t, rel=1e-12)

    def test_monotone_unit_increments(self):
        inp = PredictorInputs(2000, 100, 10**5, epsilon=0.05)
        fc = expected_clusters(inp)
        inc = np.diff(fc.t)
        assert (inc >= 0).all() and (inc <= 1 + 1e-12).all()

    def test_zero_error_plateaus(self):
        inp = PredictorInputs(5000, 100, 10**4, epsilon=0.0)
        fc = expected_clusters(inp)
        # after the first anchor every read has candidates (c>0) and joins
        assert fc.total == 1.0

    def test_monotone_in_epsilon(self):
        totals = [
            expected_clusters(
                PredictorInputs(5000, 100, 10**5, epsilon=e)
            ).total
            for e in (0.01, 0.03, 0.05, 0.08)
        ]
        assert all(a <= b for a, b in zip(totals, totals[1:]))

    def test_monotone_in_beta(self):
        lo = expected_clusters(
            PredictorInputs(5000, 100, 10**5, beta=0.90, epsilon=0.05)
        ).total
        hi = expected_clusters(
            PredictorInputs(5000, 100, 10**5, beta=0.95, epsilon=0.05)
        ).total
        assert lo <= hi

    def test_tau(self):
        inp = PredictorInputs(100, 100, 10**5, epsilon=0.03)
        fc = expected_clusters(inp)
        assert fc.tau() == pytest.approx(fc.total / 100)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            expected_clusters(PredictorInputs(0, 100, 10**6))


class TestSuggestBeta:
    def test_values(self):
        assert suggest_beta(0.025) == pytest.approx(0.95)
        assert suggest_beta(0.0) == 1.0
        assert suggest_beta(0.05) == pytest.approx(0.90)

    def test_range(self):
        with pytest.raises(ValueError):
            suggest_beta(0.3)
