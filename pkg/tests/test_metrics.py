"""Observation-space error metrics and rank bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdefilter import rank_update, rb, res, rmse
from spdefilter.weights import systematic_resample


class TestRmse:
    def test_perfect_ensemble(self):
        y = np.array([1.0, -2.0, 3.0])
        hx = np.tile(y, (5, 1))
        assert rmse(y, hx) == 0.0

    def test_factor_two_single_particle(self):
        y = np.array([1.0, 2.0])
        assert rmse(y, 2.0 * y[None, :]) == pytest.approx(1.0)

    def test_hand_case(self):
        # two particles, two points: norms 5 and 13 against ||y|| = 5
        y = np.array([3.0, 4.0])
        hx = np.array([[0.0, 0.0], [8.0, 16.0]])
        assert rmse(y, hx) == pytest.approx(0.5 * (5.0 + 13.0) / 5.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            rmse(np.zeros(2), np.ones((3, 2)))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            rmse(np.ones(3), np.ones((2, 2)))


class TestRb:
    def test_mean_equals_truth(self):
        y = np.array([1.0, -1.0])
        hx = np.array([[2.0, 0.0], [0.0, -2.0]])
        assert rb(y, hx) == 0.0

    def test_symmetric_ensemble_cancels(self):
        y = np.array([0.5, 1.5, -2.0])
        eps = np.array([0.3, -0.2, 0.7])
        hx = np.stack([y + eps, y - eps])
        assert rb(y, hx) == pytest.approx(0.0, abs=1e-15)

    def test_hand_case(self):
        y = np.array([2.0, -2.0])
        hx = np.array([[3.0, -2.0], [3.0, -2.0]])   # mean (3, -2)
        assert rb(y, hx) == pytest.approx(1.0 / 4.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            rb(np.zeros(2), np.ones((3, 2)))


class TestRes:
    def test_identical_particles(self):
        y = np.array([0.7])
        assert res(y, np.full((4, 1), 2.0)) == 0.0

    def test_two_particles_hand_algebra(self):
        # members at m +- v: deviations v each, sum 2 v^2 over (N_p-1)=1
        y = np.array([2.0])
        v = 0.6
        hx = np.array([[1.0 + v], [1.0 - v]])
        assert res(y, hx) == pytest.approx(2 * v**2 / 4.0)

    def test_quadratic_homogeneity(self):
        y = np.array([1.0, 3.0])
        rng = np.random.default_rng(0)
        hx = rng.normal(size=(6, 2))
        mean = hx.mean(axis=0)
        doubled = mean + 2.0 * (hx - mean)
        assert res(y, doubled) == pytest.approx(4.0 * res(y, hx), rel=1e-12)

    def test_needs_two_particles(self):
        with pytest.raises(ValueError):
            res(np.array([1.0]), np.array([[2.0]]))

    def test_uniform_weight_resampling_preserves_spread(self):
        # with equal weights the systematic resampler is (nearly) the
        # identity, so spread is unchanged
        rng = np.random.default_rng(1)
        hx = rng.normal(size=(8, 3))
        y = np.array([1.0, 2.0, 3.0])
        idx = systematic_resample(np.full(8, 0.125), 0.37)
        assert res(y, hx[idx]) == pytest.approx(res(y, hx))

    def test_resampling_spread_bounded_in_expectation(self):
        # resampling targets the weighted ensemble: on average the spread
        # after resampling tracks the weighted spread, not above it. (The
        # unweighted parent spread is no bound at all when weights pile
        # onto the outliers.)
        rng = np.random.default_rng(2)
        n_p = 40
        hx = rng.normal(size=(n_p, 2))
        y = np.array([1.0, 1.0])
        logw = rng.normal(size=n_p)
        w = np.exp(logw)
        w /= w.sum()

        mean_w = w @ hx
        dev = hx - mean_w
        weighted_spread = float(np.sum(w[:, None] * dev * dev)
                                / (y @ y)) * n_p / (n_p - 1)
        after = np.mean([res(y, hx[systematic_resample(w, rng.random())])
                         for _ in range(4000)])
        # resampled mean wobbles around the weighted mean, which only
        # shrinks the measured spread; allow 5% MC slack above the bound
        assert after <= weighted_spread * 1.05


class TestPermutationInvariance:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_all_metrics(self, seed):
        rng = np.random.default_rng(seed)
        n_p, m = rng.integers(2, 8), rng.integers(1, 5)
        y = rng.normal(size=m) + 2.0  # keep the norm away from zero
        hx = rng.normal(size=(n_p, m))
        perm = rng.permutation(n_p)
        assert rmse(y, hx) == pytest.approx(rmse(y, hx[perm]), rel=1e-12)
        assert rb(y, hx) == pytest.approx(rb(y, hx[perm]), rel=1e-12)
        assert res(y, hx) == pytest.approx(res(y, hx[perm]), rel=1e-12)


class TestRankUpdate:
    def test_truth_below_all(self):
        stream = np.random.default_rng(0)
        assert rank_update(-5.0, np.arange(6.0), stream) == 0

    def test_truth_above_all(self):
        stream = np.random.default_rng(0)
        assert rank_update(99.0, np.arange(6.0), stream) == 6

    def test_interior_no_ties(self):
        stream = np.random.default_rng(0)
        assert rank_update(2.5, np.array([1.0, 2.0, 3.0, 4.0]), stream) == 2

    def test_tie_draw_spans_positions(self):
        stream = np.random.default_rng(3)
        vals = np.array([1.0, 2.0, 2.0, 3.0])
        ranks = {rank_update(2.0, vals, stream) for _ in range(200)}
        assert ranks == {1, 2, 3}  # one below, two tied

    def test_calibration_uniform_histogram(self):
        # truth and members iid: pooled ranks are uniform on 0..N_p within
        # 3-sigma multinomial bands
        rng = np.random.default_rng(4)
        n_p, n_samples = 9, 100_000
        counts = np.zeros(n_p + 1, dtype=int)
        draws = rng.normal(size=(n_samples, n_p + 1))
        for row in draws:
            counts[rank_update(row[0], row[1:], rng)] += 1
        p = 1.0 / (n_p + 1)
        sigma = np.sqrt(n_samples * p * (1 - p))
        np.testing.assert_array_less(np.abs(counts - n_samples * p),
                                     3.2 * sigma)

    def test_constant_ensemble_tie_everywhere(self):
        stream = np.random.default_rng(5)
        vals = np.zeros(4)
        ranks = {rank_update(0.0, vals, stream) for _ in range(300)}
        assert ranks == {0, 1, 2, 3, 4}
