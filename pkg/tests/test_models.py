import numpy as np
import pytest

import oracles
from rootedloss import calculus, losses, models
from rootedloss._validation import DimensionError, LabelError
from rootedloss.losses import LossSpec
from rootedloss.models import MlpParams

SPECS = [LossSpec("ce"), LossSpec("rooted_ce", k=3), LossSpec("rooted_ce", k=7, m=2), LossSpec("focal", gamma=2)]


def net_loss(params, X, y, spec):
    return models.mlp_backward(params, X, y, spec)[0]


class TestForward:
    def test_identity_layer(self, rng):
        X = rng.normal(size=(5, 3))
        p = MlpParams([np.eye(3)], [np.zeros(3)])
        assert np.array_equal(models.mlp_forward(p, X), X)

    def test_zero_weights_give_biases(self, rng):
        p = MlpParams([np.zeros((2, 4))], [np.array([0.3, -1.0])])
        assert np.allclose(models.mlp_forward(p, rng.normal(size=(3, 4))), [[0.3, -1.0]] * 3)

    def test_hand_unrolled(self):
        p = models.init_params([2, 3, 2], "uniform", 4)
        p.biases[0][:] = [0.1, -0.2, 0.05]
        p.biases[1][:] = [0.3, -0.1]
        x = np.array([0.7, -1.3])
        assert np.allclose(models.mlp_forward(p, x[None])[0], oracles.mlp_logits_loop(p.weights, p.biases, x),
                           rtol=1e-14, atol=1e-15)

    def test_shape_error(self):
        p = models.init_params([3, 2], seed=0)
        with pytest.raises(DimensionError):
            models.mlp_forward(p, np.ones((2, 4)))

    def test_inconsistent_layers(self):
        with pytest.raises(DimensionError):
            MlpParams([np.ones((3, 2)), np.ones((2, 4))], [np.zeros(3), np.zeros(2)])


class TestInit:
    def test_zeros(self):
        p = models.init_params([4, 5, 2], "zeros")
        assert all(not W.any() for W in p.weights) and all(not b.any() for b in p.biases)

    def test_deterministic(self):
        a, b = models.init_params([3, 8, 2], seed=5), models.init_params([3, 8, 2], seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))

    def test_uniform_bound(self):
        p = models.init_params([2, 100], seed=1)
        assert np.abs(p.weights[0]).max() <= np.sqrt(6 / 102)

    def test_flatten_roundtrip(self):
        p = models.init_params([3, 4, 2], seed=2)
        q = p.unflatten(p.flatten())
        assert np.array_equal(q.flatten(), p.flatten())
        with pytest.raises(DimensionError):
            p.unflatten(np.zeros(3))


class TestBackward:
    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.describe())
    def test_linear_reduction(self, rng, spec):
        X = rng.normal(size=(9, 4))
        y = rng.integers(0, 3, 9)
        W = rng.normal(size=(3, 4))
        p = MlpParams([W], [np.zeros(3)])
        loss, grads = models.mlp_backward(p, X, y, spec)
        assert loss == pytest.approx(losses.evaluate_loss(W, X, y, spec), rel=1e-14)
        assert np.allclose(grads.weights[0], calculus.loss_grad(W, X, y, spec), rtol=1e-13, atol=1e-16)
        assert models.evaluate(p, X, y) == models.evaluate(W, X, y)

    @pytest.mark.parametrize("depth", [2, 3, 4])
    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.describe())
    def test_finite_differences(self, depth, spec):
        rng = np.random.default_rng(depth * 13)
        sizes = [3] + [4] * (depth - 1) + [2]
        p = models.init_params(sizes, seed=7)
        for b in p.biases:
            b += rng.normal(size=b.shape) * 0.1
        X = rng.normal(size=(6, 3))
        y = rng.integers(0, 2, 6)
        _, grads = models.mlp_backward(p, X, y, spec)
        fd = calculus.finite_diff_grad(lambda t: net_loss(p.unflatten(t), X, y, spec), p.flatten(), h=1e-5)
        assert np.allclose(grads.flatten(), fd, rtol=1e-4, atol=1e-8)

    def test_permutation_invariance(self, rng):
        p = models.init_params([2, 6, 3], seed=3)
        X = rng.normal(size=(20, 2))
        y = rng.integers(0, 3, 20)
        perm = rng.permutation(20)
        a, ga = models.mlp_backward(p, X, y, SPECS[1])
        b, gb = models.mlp_backward(p, X[perm], y[perm], SPECS[1])
        assert a == pytest.approx(b, rel=1e-12)
        assert np.allclose(ga.flatten(), gb.flatten(), rtol=1e-12, atol=1e-15)

    def test_binary_family_rejected(self):
        p = models.init_params([2, 2], seed=0)
        with pytest.raises(LabelError):
            models.mlp_backward(p, np.ones((1, 2)), np.array([0]), LossSpec("rlo"))


class TestLinearObjective:
    def test_binary_labels_checked(self):
        with pytest.raises(LabelError):
            models.linear_objective(np.ones((2, 2)), np.array([0.0, 1.0]), LossSpec("logistic"))

    def test_multiclass_shape(self, rng):
        X = rng.normal(size=(6, 3))
        obj = models.linear_objective(X, np.array([0, 1, 2, 0, 1, 2]), LossSpec("ce"))
        assert obj.shape == (3, 3) and obj.gradient(np.zeros(9)).shape == (9,)

    def test_two_logit_head_matches_binary(self, rng):
        X = rng.normal(size=(10, 2))
        y = rng.choice([-1.0, 1.0], size=10)
        w = rng.normal(size=2)
        p = MlpParams([np.vstack([w, np.zeros(2)])], [np.zeros(2)])
        loss, _ = models.mlp_backward(p, X, models.binary_to_index(y), LossSpec("rooted_ce", k=4))
        assert loss == pytest.approx(losses.rlo_loss(w, X, y, k=4), rel=1e-12)


class TestEvaluate:
    def test_perfect_separator(self):
        X = np.array([[1.0], [2.0], [-1.0], [-3.0]])
        assert models.evaluate(np.array([1.0]), X, np.array([1.0, 1.0, -1.0, -1.0])) == 1.0

    def test_zero_model_tie_convention(self):
        X = np.ones((4, 2))
        assert models.evaluate(np.zeros(2), X, np.array([1.0, -1.0, 1.0, -1.0])) == 0.5

    def test_mlp_binary_labels(self):
        p = MlpParams([np.array([[1.0], [0.0]])], [np.zeros(2)])
        X = np.array([[2.0], [-2.0]])
        assert models.evaluate(p, X, np.array([1.0, -1.0])) == 1.0
        assert models.evaluate(p, X, np.array([1.0, 1.0])) == 0.5

    def test_argmax_ties_lowest_index(self):
        assert list(models.linear_predict(np.zeros((3, 2)), np.ones((2, 2)))) == [0, 0]

    def test_index_mapping(self):
        assert list(models.binary_to_index([1.0, -1.0])) == [0, 1]
        assert list(models.index_to_binary([0, 1])) == [1.0, -1.0]


class TestDecisionGrid:
    def test_constant_logits(self, tmp_path):
        p = MlpParams([np.zeros((2, 2))], [np.zeros(2)])
        g = models.decision_grid(p, resolution=7)
        assert np.allclose(g.prob, 0.5)
        g.to_csv(tmp_path / "g.csv")
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert lines[0].startswith("# bounds=") and lines[1] == "# resolution=7"
        assert lines[2] == "x,y,p1" and len(lines) == 3 + 49

    def test_linear_separator(self):
        # logits (0, x1): class-1 probability is sigma(x1)
        p = MlpParams([np.array([[0.0, 0.0], [1.0, 0.0]])], [np.zeros(2)])
        g = models.decision_grid(p, (-1.5, 1.5, -1.5, 1.5), 101)
        assert np.all((g.prob >= 0) & (g.prob <= 1))
        col = np.argmin(np.abs(g.xs))
        assert np.allclose(g.prob[:, col], 0.5, atol=np.diff(g.xs)[0] / 4)
        assert np.allclose(g.prob, 1 / (1 + np.exp(-g.xs))[None, :], atol=1e-14)

    def test_needs_2d(self):
        with pytest.raises(DimensionError):
            models.decision_grid(models.init_params([3, 2], seed=0))
