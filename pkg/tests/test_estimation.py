"""Estimators, their exact-moment identities, and the variance pieces."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hvsampling.design import hv_sample, split_probabilities, validate_design
from hvsampling.errors import DimensionMismatchError, ZeroJointError
from hvsampling.estimation import (
    cht_total,
    expected_inverse_nprime,
    ht_total,
    ht_variance_lower_bound,
    syg_variance,
    xi0,
)
from hvsampling.joint import (
    conditional_joint,
    enumerate_distribution,
    enumerate_phase2,
)
from hvsampling.design import phase1_deltas
from hvsampling.rng import RngStream

from helpers import exact_variance, random_design, selection_for as _selection_for


# ---------------------------------------------------------------------------
# Point estimates, hand values
# ---------------------------------------------------------------------------

class TestPointEstimates:
    def test_ht_worked_value(self, worked_design):
        """Sample {2,3} with y = 1: 1/0.7 + 1/0.8 = 2.678571..."""
        sel = _selection_for(worked_design, (1, 2), 2)
        res = ht_total(sel, np.ones(3))
        assert_allclose(res.total, 1 / 0.7 + 1 / 0.8, rtol=0, atol=1e-12)
        assert res.estimator_kind == "HT"
        assert_allclose(res.mean * 3, res.total, rtol=1e-15, atol=0)

    def test_cht_worked_value(self, worked_design):
        """Same sample under n' = 2: 19/14 + 19/14 = 2.714285..."""
        sel = _selection_for(worked_design, (1, 2), 2)
        res = cht_total(sel, np.ones(3))
        assert_allclose(res.total, 38 / 14, rtol=0, atol=1e-12)
        assert res.estimator_kind == "CHT"
        assert res.variance_estimate is None

    def test_cht_uses_certainty_weight_one(self, worked_design):
        # n' = 1, sample {1, 3}: unit 3 is certain, weight exactly 1
        sel = _selection_for(worked_design, (0, 2), 1)
        res = cht_total(sel, np.array([2.0, 0.0, 5.0]))
        assert_allclose(res.total, 2.0 * 12 / 5 + 5.0, rtol=0, atol=1e-12)

    def test_caller_order_respected(self):
        d = validate_design([0.8, 0.5, 0.7])
        # sorted unit 0 is caller unit 1 (pi = 0.5)
        sel = _selection_for(d, (0, 2), 2)
        y = np.array([100.0, 1.0, 0.0])
        res = ht_total(sel, y)
        # caller units in the sample: perm[0] = 1 (y=1), perm[2] = 0 (y=100)
        assert_allclose(res.total, 1.0 / 0.5 + 100.0 / 0.8, rtol=0, atol=1e-12)

    def test_length_mismatch_rejected(self, worked_design):
        sel = _selection_for(worked_design, (1, 2), 2)
        with pytest.raises(DimensionMismatchError):
            ht_total(sel, np.ones(4))


# ---------------------------------------------------------------------------
# Exact unbiasedness via enumeration
# ---------------------------------------------------------------------------

class TestUnbiasedness:
    def test_ht_unbiased_over_full_design(self, np_rng):
        for _ in range(15):
            d = random_design(np_rng)
            y = np_rng.normal(10.0, 3.0, d.size)
            ys = y[d.perm]
            dist = enumerate_distribution(d)
            mean, _ = exact_variance(dist, ys / d.pi)
            assert_allclose(mean, float(y.sum()), rtol=1e-10, atol=1e-10)

    def test_cht_conditionally_unbiased(self, np_rng):
        """E[sum y/pi0 | split] = total for every working size."""
        for _ in range(15):
            d = random_design(np_rng)
            y = np_rng.normal(10.0, 3.0, d.size)
            ys = y[d.perm]
            for npr in range(1, d.n + 1):
                s = split_probabilities(d, npr)
                mean, _ = exact_variance(enumerate_phase2(s), ys / s.pi0)
                assert_allclose(mean, float(y.sum()), rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# Variance pieces
# ---------------------------------------------------------------------------

class TestSygVariance:
    def test_worked_value(self, worked_design):
        """Sample {2,3} under n' = 2, y = (0, 1, 0): the single pair has
        pi_23(0) = 9/19 and marginals 14/19 each, so the coefficient is
        (196/361 - 171/361) / (9/19) = 25/171; with e = (19/14, 0) the
        estimate is (25/171) * (19/14)^2 = 475/1764."""
        sel = _selection_for(worked_design, (1, 2), 2)
        v = syg_variance(sel, np.array([0.0, 1.0, 0.0]))
        assert_allclose(v, 475.0 / 1764.0, rtol=0, atol=1e-12)

    def test_unbiased_for_conditional_variance(self, np_rng):
        """E[v_hat | split] equals the exact conditional variance."""
        for _ in range(12):
            d = random_design(np_rng)
            y = np_rng.normal(5.0, 2.0, d.size)
            ys = y[d.perm]
            for npr in range(2, d.n + 1):
                s = split_probabilities(d, npr)
                dist = enumerate_phase2(s)
                _, exact = exact_variance(dist, ys / s.pi0)
                est_mean = sum(
                    prob * syg_variance(_selection_for(d, tuple(key), npr), y)
                    for key, prob in dist.entries.items()
                )
                assert_allclose(est_mean, exact, rtol=1e-9, atol=1e-10)

    def test_nonnegative_on_random_samples(self, np_rng):
        for _ in range(40):
            d = random_design(np_rng, size=int(np_rng.integers(4, 12)))
            y = np_rng.normal(0.0, 4.0, d.size)
            sel = hv_sample(d, RngStream(int(np_rng.integers(1 << 30)), 2))
            assert syg_variance(sel, y) >= 0.0

    def test_with_variance_flag(self, worked_design):
        sel = _selection_for(worked_design, (1, 2), 2)
        res = cht_total(sel, np.array([0.0, 1.0, 0.0]), with_variance=True)
        assert_allclose(res.variance_estimate, 475.0 / 1764.0, rtol=0, atol=1e-12)

    def test_foreign_joint_rejected(self, worked_design):
        sel = _selection_for(worked_design, (1, 2), 2)
        wrong = conditional_joint(split_probabilities(worked_design, 1))
        with pytest.raises(ZeroJointError):
            syg_variance(sel, np.ones(3), joint=wrong)

    def test_single_working_unit_scores_zero(self, worked_design):
        sel = _selection_for(worked_design, (0, 2), 1)
        assert syg_variance(sel, np.array([3.0, 1.0, 2.0])) == 0.0


class TestXi0:
    def test_worked_values(self, worked_design):
        """y = (1,0,0): xi(0|1) = (5/12 - 1/2)/(1/2) = -1/6,
        xi(0|2) = (10/19 - 1/2)/(1/2) = 1/19."""
        y = np.array([1.0, 0.0, 0.0])
        assert_allclose(
            xi0(split_probabilities(worked_design, 1), y), -1 / 6, rtol=0, atol=1e-12
        )
        assert_allclose(
            xi0(split_probabilities(worked_design, 2), y), 1 / 19, rtol=0, atol=1e-12
        )

    def test_mean_over_working_sizes_is_zero(self, np_rng):
        """sum_i delta_i xi(0|i) = 0: the mixture identity transferred."""
        for _ in range(20):
            d = random_design(np_rng, size=int(np_rng.integers(3, 20)))
            y = np_rng.normal(3.0, 1.0, d.size)
            delta = phase1_deltas(d)
            acc = sum(
                float(w) * xi0(split_probabilities(d, i), y)
                for i, w in enumerate(delta, start=1)
            )
            assert abs(acc) < 1e-10

    def test_equals_conditional_bias_of_ht(self, np_rng):
        """xi(0|i) = E[HT | split i] - total."""
        for _ in range(10):
            d = random_design(np_rng)
            y = np_rng.normal(2.0, 1.0, d.size)
            ys = y[d.perm]
            for npr in range(1, d.n + 1):
                s = split_probabilities(d, npr)
                mean, _ = exact_variance(enumerate_phase2(s), ys / d.pi)
                assert_allclose(
                    xi0(s, y), mean - float(y.sum()), rtol=1e-9, atol=1e-10
                )


class TestVarianceBound:
    def test_worked_value(self, worked_design):
        """y = 1: shift at n' = n is 1/19... the bound is 0.76/1444."""
        b = ht_variance_lower_bound(worked_design, np.ones(3))
        assert_allclose(b, 0.76 / 1444.0, rtol=0, atol=1e-15)

    def test_bound_holds_against_enumeration(self, np_rng):
        for _ in range(20):
            d = random_design(np_rng)
            y = np_rng.normal(8.0, 2.0, d.size)
            ys = y[d.perm]
            _, var = exact_variance(enumerate_distribution(d), ys / d.pi)
            assert var >= ht_variance_lower_bound(d, y) - 1e-12

    def test_bound_is_delta_weighted_top_xi(self, np_rng):
        for _ in range(20):
            d = random_design(np_rng, size=int(np_rng.integers(3, 15)))
            y = np_rng.normal(1.0, 5.0, d.size)
            delta = phase1_deltas(d)
            top_xi = xi0(split_probabilities(d, d.n), y)
            assert_allclose(
                ht_variance_lower_bound(d, y),
                float(delta[-1]) * top_xi**2,
                rtol=1e-10,
                atol=1e-12,
            )


class TestExpectedInverseWorkingSize:
    def test_worked_value(self, worked_design):
        """0.24/1 + 0.76/2 = 0.62."""
        assert_allclose(expected_inverse_nprime(worked_design), 0.62, rtol=0, atol=1e-12)

    def test_matches_delta_weighted_sum(self, np_rng):
        for _ in range(50):
            d = random_design(np_rng, size=int(np_rng.integers(3, 40)))
            delta = phase1_deltas(d)
            i = np.arange(1, d.n + 1)
            assert_allclose(
                expected_inverse_nprime(d),
                float(np.sum(delta / i)),
                rtol=0,
                atol=1e-12,
            )
