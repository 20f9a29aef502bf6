import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from rootedloss import losses
from rootedloss._validation import DimensionError, LabelError
from rootedloss.losses import Family, LossSpec

E1 = np.array([[1.0, 0.0]])
W2 = np.array([2.0, 0.0])


def two_logit(w, X):
    z = X @ w
    return np.column_stack([z, np.zeros_like(z)])


# frozen from the mpmath oracle (tests/oracles.py)
RLO_AT_2_K3 = 3.129651403551564
RLO_GRAD_AT_2_K3 = -0.12435453073798929


class TestSoftplus:
    def test_symmetric_point(self):
        assert losses.softplus(0.0) == pytest.approx(np.log(2), rel=1e-15)

    def test_large_argument(self):
        assert losses.softplus(1000.0) == pytest.approx(1000.0, rel=1e-12)

    def test_tiny_tail(self):
        assert losses.softplus(-40.0) == pytest.approx(4.248354255291589e-18, rel=1e-12)

    def test_vectorised(self):
        t = np.array([-5.0, 0.0, 5.0])
        assert np.allclose(losses.softplus(t), np.log1p(np.exp(t)))


class TestLogistic:
    def test_zero_weights(self, rng):
        X = rng.normal(size=(7, 3))
        y = rng.choice([-1.0, 1.0], size=7)
        assert losses.logistic_loss(np.zeros(3), X, y) == pytest.approx(np.log(2))

    @pytest.mark.parametrize("y, expected", [(1.0, 0.1269280110429725), (-1.0, 2.1269280110429727)])
    def test_single_point(self, y, expected):
        assert losses.logistic_loss(W2, E1, np.array([y])) == pytest.approx(expected, rel=1e-12)

    def test_matches_oracle(self, rng):
        X = rng.normal(size=(6, 2))
        y = rng.choice([-1.0, 1.0], size=6)
        w = rng.normal(size=2) * 3
        z = y * (X @ w)
        assert losses.logistic_loss(w, X, y) == pytest.approx(np.mean([oracles.logistic(v) for v in z]), rel=1e-13)


class TestRlo:
    @pytest.mark.parametrize("k, expected", [(2, 2 * np.sqrt(2)), (4, 4.756828460010884)])
    def test_zero_weights(self, k, expected):
        assert losses.rlo_loss(np.zeros(2), E1, np.array([1.0]), k=k) == pytest.approx(expected, rel=1e-14)

    def test_single_point_value(self):
        assert losses.rlo_loss(W2, E1, np.array([1.0]), k=3) == pytest.approx(RLO_AT_2_K3, rel=1e-12)

    def test_m_scales_linearly(self, rng):
        X = rng.normal(size=(5, 2))
        y = np.ones(5)
        w = rng.normal(size=2)
        a = losses.rlo_loss(w, X, y, k=4, m=4)
        b = losses.rlo_loss(w, X, y, k=4, m=1)
        assert a == pytest.approx(4 * b, rel=1e-14)

    def test_lower_bound(self, rng):
        for _ in range(50):
            X = rng.normal(size=(8, 3)) * 5
            y = rng.choice([-1.0, 1.0], size=8)
            w = rng.normal(size=3) * 5
            k = rng.uniform(1.1, 50)
            assert losses.rlo_loss(w, X, y, k=k) >= k

    def test_rejects_bad_root(self):
        with pytest.raises(ValueError):
            losses.rlo_loss(W2, E1, np.array([1.0]), k=1.0)


class TestMulticlass:
    def test_uniform_ce(self):
        X = np.ones((4, 2))
        assert losses.ce_loss(np.zeros((3, 2)), X, np.array([0, 1, 2, 0])) == pytest.approx(np.log(3))

    def test_confident_logits(self):
        logp = losses.true_class_log_prob(np.array([[10.0, 0.0]]), np.array([0]))
        assert losses.ce_point(logp)[0] == pytest.approx(4.539889921686465e-05, rel=1e-12)

    def test_uniform_rooted(self):
        X = np.ones((3, 2))
        val = losses.rooted_ce_loss(np.zeros((3, 2)), X, np.array([0, 1, 2]), k=3)
        assert val == pytest.approx(4.326748710922225, rel=1e-14)

    def test_rooted_point_closed_form(self):
        assert losses.rooted_ce_point(np.log(0.9), 10) == pytest.approx(10.105917512032914, rel=1e-14)

    @pytest.mark.parametrize("p, expected", [(0.5, 0.25 * np.log(2)), (0.9, 0.001053605156578263)])
    def test_focal_closed_form(self, p, expected):
        assert losses.focal_point(np.log(p), 2.0) == pytest.approx(expected, rel=1e-12)

    def test_focal_gamma_zero_is_ce(self, rng):
        X = rng.normal(size=(9, 4))
        W = rng.normal(size=(3, 4))
        y = rng.integers(0, 3, 9)
        assert losses.focal_loss(W, X, y, gamma=0.0) == pytest.approx(losses.ce_loss(W, X, y), rel=1e-14)

    def test_oracles(self, rng):
        X = rng.normal(size=(6, 3))
        W = rng.normal(size=(4, 3)) * 2
        y = rng.integers(0, 4, 6)
        logits = X @ W.T
        assert losses.ce_loss(W, X, y) == pytest.approx(oracles.ce(logits, y), rel=1e-13)
        assert losses.rooted_ce_loss(W, X, y, k=5, m=2) == pytest.approx(oracles.rooted_ce(logits, y, 5, 2), rel=1e-13)
        assert losses.focal_loss(W, X, y, 1.5) == pytest.approx(oracles.focal(logits, y, 1.5), rel=1e-12)

    def test_two_class_ce_is_logistic(self, rng):
        X = rng.normal(size=(10, 3))
        y = rng.choice([-1.0, 1.0], size=10)
        w = rng.normal(size=3)
        idx = ((1 - y) // 2).astype(int)
        logp = losses.true_class_log_prob(two_logit(w, X), idx)
        assert np.mean(losses.ce_point(logp)) == pytest.approx(losses.logistic_loss(w, X, y), rel=1e-13)

    def test_label_out_of_range(self):
        with pytest.raises(LabelError):
            losses.ce_loss(np.zeros((2, 2)), np.ones((1, 2)), np.array([2]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            losses.ce_loss(np.zeros((2, 3)), np.ones((1, 2)), np.array([0]))


class TestBinaryConsistency:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.01, 1e4), st.floats(0.1, 30.0))
    def test_rooted_ce_two_logits_equals_rlo(self, seed, k, scale):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 3))
        y = rng.choice([-1.0, 1.0], size=12)
        w = rng.normal(size=3) * scale
        idx = ((1 - y) // 2).astype(int)
        logp = losses.true_class_log_prob(two_logit(w, X), idx)
        rooted = np.mean(losses.rooted_ce_point(logp, k))
        assert rooted == pytest.approx(losses.rlo_loss(w, X, y, k=k), rel=1e-12)


class TestStability:
    @pytest.mark.parametrize("z", [-1e4, -700.0, -50.0, 0.0, 50.0, 700.0, 1e4])
    def test_logistic_finite(self, z):
        assert np.isfinite(losses.logistic_point(np.array([z]))).all()

    @pytest.mark.parametrize("z", [-1e4, 0.0, 1e4])
    @pytest.mark.parametrize("k", [20.0, 100.0, 1e3])
    def test_rlo_finite_when_representable(self, z, k):
        # k (1 + e^{-z})^{1/k} ~ k e^{-z/k}; at z = -1e4 this fits in float64 for k >= ~14.5
        v = losses.rlo_point(np.array([z]), k)
        assert np.isfinite(v).all()

    def test_rlo_overflows_honestly_for_small_k(self):
        # the true value 3 e^{1e4/3} exceeds float64 range; inf is the correct answer
        with np.errstate(over="ignore"):
            assert np.isinf(losses.rlo_point(np.array([-1e4]), 3.0))[0]

    def test_rlo_large_negative_matches_log_space(self):
        z, k = -1000.0, 5.0
        expected = np.log(k) + (-z) / k
        assert np.log(losses.rlo_point(np.array([z]), k)[0]) == pytest.approx(expected, rel=1e-12)

    def test_ce_extreme_logits(self):
        logits = np.array([[1e4, -1e4], [-1e4, 1e4]])
        logp = losses.true_class_log_prob(logits, np.array([0, 0]))
        assert np.isfinite(losses.ce_point(logp)).all()
        assert np.isfinite(losses.focal_point(logp, 2.0)).all()


class TestMonotone:
    def test_strictly_decreasing_in_margin(self):
        z = np.linspace(-15, 15, 2001)
        for values in (losses.logistic_point(z), losses.rlo_point(z, 3.0), losses.rlo_point(z, 50.0)):
            assert np.all(np.diff(values) < 0)

    def test_nonincreasing_where_float_resolution_runs_out(self):
        # beyond z ~ 30 the decrease of k (1 + e^{-z})^{1/k} falls below one ulp of k
        z = np.linspace(-30, 60, 3001)
        for values in (losses.logistic_point(z), losses.rlo_point(z, 3.0), losses.rlo_point(z, 50.0)):
            assert np.all(np.diff(values) <= 0)


class TestLimit:
    def test_rlo_minus_k_approaches_logistic(self, rng):
        X = rng.normal(size=(30, 4))
        y = rng.choice([-1.0, 1.0], size=30)
        w = rng.normal(size=4)
        lr = losses.logistic_loss(w, X, y)
        gaps = [abs((losses.rlo_loss(w, X, y, k=k) - k) - lr) for k in (10.0, 100.0, 1000.0)]
        assert gaps[0] >= gaps[1] >= gaps[2]
        bound = np.max(losses.logistic_point(losses.margins(w, X, y)) ** 2) / 1000.0
        assert gaps[2] <= bound


class TestSpec:
    def test_defaults(self):
        spec = LossSpec("rlo", k=4)
        assert spec.m == 4 and spec.family is Family.RLO and spec.is_binary

    def test_evaluate_dispatch(self):
        X = np.ones((3, 2))
        assert losses.evaluate_loss(np.zeros(2), X, np.ones(3), LossSpec("rlo", k=3)) == pytest.approx(3.779763149684619)
        assert losses.evaluate_loss(np.zeros((3, 2)), X, np.array([0, 1, 2]), LossSpec("rooted_ce", k=3)) == pytest.approx(4.326748710922225)
        w = np.array([0.3, -0.2])
        y = np.array([1.0, -1.0, 1.0])
        assert losses.evaluate_loss(w, X, y, LossSpec("logistic")) == losses.logistic_loss(w, X, y)

    @pytest.mark.parametrize("kwargs", [{"family": "rlo", "k": 0.5}, {"family": "rlo", "m": -1},
                                        {"family": "focal", "gamma": -1}, {"family": "hinge"}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LossSpec(**kwargs)

    def test_describe(self):
        assert LossSpec("rooted_ce", k=3).describe() == "rooted_ce(k=3,m=3)"
