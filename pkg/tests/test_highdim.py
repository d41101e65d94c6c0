import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftlab.highdim import (
    directional_derivative_check,
    epsilon_adversarial,
    epsilon_threshold_prediction,
    gd_interpolant,
    gradient_norm_prediction,
    min_norm_interpolant,
    orthogonality_stats,
    sample_gaussian_dataset,
    span_residual,
)

# The two checks below encode a concentration claim that does not hold for
# the least-norm interpolant: its norm concentrates near sqrt(n), not
# sqrt(n/3). They are kept as strict xfails so a fix would be noticed.
NORM_CLAIM = pytest.mark.xfail(strict=True, reason="least-norm interpolant has |w| ~ sqrt(n), not sqrt(n/3)")


@pytest.fixture(scope="module")
def big():
    return sample_gaussian_dataset(64, 4096, 0)


class TestSampling:
    def test_mean_norm_near_one(self):
        data = sample_gaussian_dataset(200, 4096, 1)
        assert 0.98 < np.linalg.norm(data.X, axis=1).mean() < 1.02

    @given(st.integers(2, 30), st.integers(2, 40), st.integers(0, 2**31))
    def test_labels_are_first_sign(self, n, d, seed):
        data = sample_gaussian_dataset(n, d, seed)
        np.testing.assert_array_equal(data.y, np.sign(data.X[:, 0]))
        assert np.all(data.y != 0)
        assert data.sigma == pytest.approx(1 / math.sqrt(d))

    def test_deterministic(self):
        a, b = sample_gaussian_dataset(5, 9, 3), sample_gaussian_dataset(5, 9, 3)
        np.testing.assert_array_equal(a.X, b.X)

    @pytest.mark.parametrize("n,d", [(1, 5), (5, 1)])
    def test_rejects_small(self, n, d):
        with pytest.raises(ValueError):
            sample_gaussian_dataset(n, d, 0)


class TestMinNormInterpolant:
    def test_orthonormal_rows(self):
        w = min_norm_interpolant((np.eye(2), np.array([1.0, -1.0]))).w
        np.testing.assert_allclose(w, [1.0, -1.0], atol=1e-15)

    def test_scaling(self):
        w = min_norm_interpolant((np.array([[2.0, 0.0]]), np.array([1.0]))).w
        np.testing.assert_allclose(w, [0.5, 0.0], atol=1e-15)

    def test_matches_lstsq(self):
        data = sample_gaussian_dataset(8, 64, 2)
        ref = np.linalg.lstsq(data.X, data.y, rcond=None)[0]
        np.testing.assert_allclose(min_norm_interpolant(data).w, ref, atol=1e-8)

    @given(st.integers(2, 12), st.integers(0, 2**31))
    def test_interpolates_in_span(self, n, seed):
        data = sample_gaussian_dataset(n, 64, seed)
        interp = min_norm_interpolant(data)
        assert interp.residual <= 1e-8
        assert np.linalg.norm(span_residual(data.X, interp.w)) <= 1e-8 * interp.norm

    def test_rank_deficient(self):
        X = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            min_norm_interpolant((X, np.array([1.0, -1.0])))

    def test_more_points_than_dims(self):
        with pytest.raises(ValueError):
            min_norm_interpolant((np.ones((3, 2)), np.ones(3)))


class TestGdInterpolant:
    def test_from_zero_reaches_min_norm(self):
        data = sample_gaussian_dataset(8, 64, 4)
        gd, _ = gd_interpolant(data, lr=0.5, steps=2000)
        np.testing.assert_allclose(gd.w, min_norm_interpolant(data).w, atol=1e-4)

    def test_orthogonal_component_frozen(self):
        data = sample_gaussian_dataset(6, 32, 5)
        u = span_residual(data.X, np.random.default_rng(0).standard_normal(32))
        gd, w0 = gd_interpolant(data, lr=0.5, steps=500, init=u + data.X[0])
        assert abs((gd.w - w0) @ u) <= 1e-8
        np.testing.assert_allclose(span_residual(data.X, gd.w), u, atol=1e-8)

    def test_random_init_keeps_offset(self):
        data = sample_gaussian_dataset(6, 32, 6)
        gd, w0 = gd_interpolant(data, lr=0.5, steps=500, init_in_span=False, seed=1)
        np.testing.assert_allclose(span_residual(data.X, gd.w), span_residual(data.X, w0), atol=1e-8)

    def test_zero_lr(self):
        data = sample_gaussian_dataset(4, 16, 7)
        init = np.arange(16.0)
        gd, _ = gd_interpolant(data, lr=0.0, steps=10, init=init)
        np.testing.assert_array_equal(gd.w, init)

    def test_divergence(self):
        data = sample_gaussian_dataset(4, 16, 7)
        with pytest.raises(FloatingPointError):
            gd_interpolant(data, lr=100.0, steps=200)


class TestOrthogonalityStats:
    def test_idealised(self):
        X = np.eye(6)
        y = np.array([1, 1, 1, -1, -1, -1.0])
        s = orthogonality_stats((X, y))
        assert s["max_abs_inner"] == 0.0
        assert s["pair_distance_min"] == pytest.approx(math.sqrt(2))
        assert s["pair_distance_max"] == pytest.approx(math.sqrt(2))
        assert s["pair_cosine_mean"] == pytest.approx(0.5)

    def test_high_dim(self, big):
        s = orthogonality_stats(big)
        assert s["max_abs_inner"] < 0.1
        assert 1.37 < s["pair_distance_mean"] < 1.46

    def test_decays_with_dimension(self):
        lo = [orthogonality_stats(sample_gaussian_dataset(64, 1024, s))["max_abs_inner"] for s in range(10)]
        hi = [orthogonality_stats(sample_gaussian_dataset(64, 16384, s))["max_abs_inner"] for s in range(10)]
        assert np.median(hi) < np.median(lo)


class TestPredictions:
    @pytest.mark.parametrize("n,expected", [(64, 8 / math.sqrt(3)), (3, 1.0), (2, math.sqrt(2 / 3))])
    def test_norm(self, n, expected):
        assert gradient_norm_prediction(n) == pytest.approx(expected, rel=1e-15)

    def test_threshold(self):
        assert epsilon_threshold_prediction(64) == pytest.approx(math.sqrt(3) / 8, rel=1e-15)

    @given(st.integers(2, 10_000))
    def test_reciprocal(self, n):
        assert gradient_norm_prediction(n) * epsilon_threshold_prediction(n) == pytest.approx(1.0)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            gradient_norm_prediction(1)

    @NORM_CLAIM
    def test_norm_concentration(self):
        for seed in range(10):
            w = min_norm_interpolant(sample_gaussian_dataset(64, 4096, seed))
            assert 0.85 < w.norm / gradient_norm_prediction(64) < 1.15

    def test_norm_near_sqrt_n(self):
        for seed in range(10):
            w = min_norm_interpolant(sample_gaussian_dataset(64, 4096, seed))
            assert 0.85 < w.norm / 8.0 < 1.15


class TestEpsilonAdversarial:
    def test_flip(self):
        res, dist = epsilon_adversarial([1.0, 0.0], 1, [1.0, 0.0], 1.5)
        assert res.success and dist == 1.0
        np.testing.assert_allclose(res.adversarial_point, [-0.5, 0.0])

    def test_no_flip(self):
        res, dist = epsilon_adversarial([1.0, 0.0], 1, [1.0, 0.0], 0.5)
        assert not res.success and dist == 1.0

    def test_zero_gradient(self):
        with pytest.raises(ValueError):
            epsilon_adversarial([1.0, 0.0], 1, [0.0, 0.0], 0.5)

    def test_wrong_label(self):
        with pytest.raises(ValueError):
            epsilon_adversarial([1.0, 0.0], -1, [1.0, 0.0], 0.5)

    def test_distance_is_inverse_norm(self, big):
        w = min_norm_interpolant(big)
        for x, y in zip(big.X, big.y):
            _, dist = epsilon_adversarial(x, int(y), w.w, 0.1)
            assert dist == pytest.approx(1 / w.norm, abs=1e-10)

    @NORM_CLAIM
    def test_mean_distance_near_threshold(self, big):
        w = min_norm_interpolant(big)
        mean = np.mean([epsilon_adversarial(x, int(y), w.w, 0.1)[1] for x, y in zip(big.X, big.y)])
        assert 0.8 * math.sqrt(3) / 8 < mean < 1.2 * math.sqrt(3) / 8


class TestDirectionalDerivative:
    def test_exact_two(self, big):
        rep = directional_derivative_check(big, min_norm_interpolant(big).w)
        assert rep["max_dev_from_two"] <= 1e-8
        assert rep["max_dev_from_two_over_length"] <= 1e-8

    def test_near_sqrt2(self, big):
        rep = directional_derivative_check(big, min_norm_interpolant(big).w)
        assert rep["fraction_near_sqrt2"] >= 0.95

    def test_orthonormal(self):
        X, y = np.eye(4), np.array([1, 1, -1, -1.0])
        rep = directional_derivative_check((X, y), min_norm_interpolant((X, y)).w)
        np.testing.assert_allclose(rep["unit_derivatives"], math.sqrt(2), rtol=1e-14)

    def test_single_class(self):
        with pytest.raises(ValueError):
            directional_derivative_check((np.eye(2), np.ones(2)), np.ones(2))
