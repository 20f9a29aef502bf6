"""scikit-learn compatible wrappers.

These estimators compose with pipelines, grid search and cross-validation
utilities; training itself runs through :mod:`rootedloss.optim` with the
library's own losses and gradients.
"""

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import models, optim
from .data import fit_standardization
from .losses import Family, LossSpec, sigmoid


class Standardizer(TransformerMixin, BaseEstimator):
    """Column standardization; zero-variance columns pass through untouched."""

    def fit(self, X, y=None):
        X = check_array(X)
        stats = fit_standardization(X)
        self.mean_, self.scale_, self.constant_ = stats.mean, stats.std, stats.constant
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X)
        out = (X - self.mean_) / self.scale_
        out[:, self.constant_] = X[:, self.constant_]
        return out


class RootedLogisticRegression(ClassifierMixin, BaseEstimator):
    """Linear classifier trained on the logistic or rooted logistic objective.

    Parameters
    ----------
    loss : {"rlo", "logistic"}
    k, m : float
        Root and multiplier of the rooted objective; ``m=None`` uses ``k``.
    learning_rate, max_iter : float, int
        Fixed step size and number of gradient steps.
    l2 : float
        Strength of the ``l2 / 2 * |w|^2`` penalty.
    fit_intercept : bool
        Learn a bias through an appended constant feature.
    penalize_intercept : bool
        Whether the L2 penalty also shrinks the bias.
    batch_size : int or None
        ``None`` trains full batch; otherwise mini-batch SGD.

    More than two classes are handled one-vs-all; ``decision_function``
    then returns one column per class.
    """

    def __init__(self, loss="rlo", k=3.0, m=None, learning_rate=0.01, max_iter=200, l2=0.0,
                 fit_intercept=True, penalize_intercept=False, batch_size=None, random_state=0,
                 record_every=1):
        self.loss = loss
        self.k = k
        self.m = m
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.l2 = l2
        self.fit_intercept = fit_intercept
        self.penalize_intercept = penalize_intercept
        self.batch_size = batch_size
        self.random_state = random_state
        self.record_every = record_every

    def _spec(self):
        if self.loss not in ("rlo", "logistic"):
            raise ValueError(f"loss must be 'rlo' or 'logistic', got {self.loss!r}")
        return LossSpec(self.loss, k=self.k, m=self.m)

    def _augment(self, X):
        return models.add_bias_column(X) if self.fit_intercept else X

    def _config(self, d):
        mask = None
        if self.fit_intercept and not self.penalize_intercept:
            mask = tuple([1.0] * (d - 1) + [0.0])
        return optim.OptimizerConfig(self.learning_rate, self.max_iter, self.batch_size, self.l2,
                                     self.random_state, self.record_every, mask)

    def _fit_binary(self, Xa, ypm, eval_set):
        objective = models.linear_objective(Xa, ypm, self._spec())
        hook = None
        if eval_set is not None:
            Xv, yv = eval_set

            def hook(w):
                return (float(np.mean(models.linear_predict(w, Xa) == ypm)),
                        float(np.mean(models.linear_predict(w, Xv) == yv)))
        return optim.run(objective, np.zeros(Xa.shape[1]), self._config(Xa.shape[1]), hook)

    def fit(self, X, y, eval_set=None):
        """Fit from zero initial weights.

        ``eval_set=(X_val, y_val)`` records held-out accuracy in ``trace_``.
        """
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        Xa = self._augment(X)
        Xv = yv = None
        if eval_set is not None:
            Xv = self._augment(check_array(eval_set[0]))
            yv = np.asarray(eval_set[1])
        targets = [self.classes_[1]] if len(self.classes_) == 2 else list(self.classes_)
        results = []
        for cls in targets:
            ypm = np.where(y == cls, 1.0, -1.0)
            ev = None if Xv is None else (Xv, np.where(yv == cls, 1.0, -1.0))
            results.append(self._fit_binary(Xa, ypm, ev))
        W = np.vstack([r.params for r in results])
        if self.fit_intercept:
            self.coef_, self.intercept_ = W[:, :-1], W[:, -1].copy()
        else:
            self.coef_, self.intercept_ = W, np.zeros(W.shape[0])
        self.traces_ = [r.trace for r in results]
        self.trace_ = self.traces_[0] if len(results) == 1 else optim.mean_trace(self.traces_)
        self.status_ = "diverged" if any(r.diverged for r in results) else "ok"
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        scores = X @ self.coef_.T + self.intercept_
        return scores[:, 0] if scores.shape[1] == 1 else scores

    def predict(self, X):
        s = self.decision_function(X)
        if s.ndim == 1:
            return np.where(s >= 0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(s, axis=1)]

    def predict_proba(self, X):
        s = self.decision_function(X)
        if s.ndim == 1:
            p = sigmoid(s)
            return np.column_stack([1 - p, p])
        p = sigmoid(s)
        return p / p.sum(axis=1, keepdims=True)


class FCNClassifier(ClassifierMixin, BaseEstimator):
    """Fully-connected ReLU network with a softmax head.

    ``loss`` is one of ``"ce"``, ``"rooted_ce"`` or ``"focal"``. Training is
    full-batch gradient descent unless ``batch_size`` is set.
    """

    def __init__(self, hidden_layer_sizes=(100,), loss="rooted_ce", k=3.0, m=None, gamma=2.0,
                 learning_rate=0.01, max_iter=1000, batch_size=None, init="uniform",
                 random_state=0, record_every=10):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.loss = loss
        self.k = k
        self.m = m
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.init = init
        self.random_state = random_state
        self.record_every = record_every

    def fit(self, X, y, eval_set=None):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_, idx = np.unique(y, return_inverse=True)
        c = max(len(self.classes_), 2)
        spec = LossSpec(self.loss, k=self.k, m=self.m, gamma=self.gamma)
        if spec.family not in (Family.CROSS_ENTROPY, Family.ROOTED_CE, Family.FOCAL):
            raise ValueError(f"network loss must be ce, rooted_ce or focal, got {self.loss!r}")
        sizes = [X.shape[1], *self.hidden_layer_sizes, c]
        init = models.init_params(sizes, self.init, self.random_state)
        objective = models.MlpObjective(init, X, idx, spec)
        hook = None
        if eval_set is not None:
            Xv = check_array(eval_set[0])
            yv = np.searchsorted(self.classes_, np.asarray(eval_set[1]))

            def hook(theta):
                p = init.unflatten(theta)
                return (float(np.mean(models.mlp_predict(p, X) == idx)),
                        float(np.mean(models.mlp_predict(p, Xv) == yv)))
        cfg = optim.OptimizerConfig(self.learning_rate, self.max_iter, self.batch_size, 0.0,
                                    self.random_state, self.record_every)
        result = optim.run(objective, init.flatten(), cfg, hook)
        self.params_ = init.unflatten(result.params)
        self.trace_ = result.trace
        self.status_ = result.status
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return softmax(models.mlp_forward(self.params_, check_array(X)), axis=1)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
