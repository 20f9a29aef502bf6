"""Linear classifiers and fully-connected networks with hand-written backprop.

Both model kinds expose an objective adapter (``value_and_grad`` over a
flat parameter vector) for :mod:`rootedloss.optim`.

Binary labels enter the softmax models as class indices with +1 -> 0 and
-1 -> 1, so a two-logit model with logits ``(w @ x, 0)`` reproduces the
logistic and RLO objectives exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from . import calculus, losses
from ._validation import DimensionError, LabelError
from .losses import Family, LossSpec


def add_bias_column(X):
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def binary_to_index(y):
    return ((1 - np.asarray(y, dtype=float)) // 2).astype(np.int64)


def index_to_binary(idx):
    return 1.0 - 2.0 * np.asarray(idx, dtype=float)


# -- linear models -----------------------------------------------------------

class LinearObjective:
    """Mean loss of a linear predictor, for any loss family.

    Parameters are a d-vector for binary families and a flattened c x d
    matrix for multiclass families.
    """

    def __init__(self, X, y, spec, n_classes=None):
        self.X = np.asarray(X, dtype=float)
        self.spec = spec
        if spec.is_binary:
            y = np.asarray(y, dtype=float)
            if not np.all((y == 1) | (y == -1)):
                raise LabelError(f"{spec.family.value} needs labels in {{+1, -1}}")
            self.shape = (self.X.shape[1],)
        else:
            y = np.asarray(y)
            if not np.issubdtype(y.dtype, np.integer) and not np.all(np.mod(y, 1) == 0):
                raise LabelError(f"{spec.family.value} needs integer class indices")
            y = y.astype(np.int64)
            if np.any(y < 0):
                raise LabelError(f"{spec.family.value} needs class indices, got negative labels")
            c = int(y.max()) + 1 if n_classes is None else n_classes
            self.shape = (max(c, 2), self.X.shape[1])
        self.y = y

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_params(self):
        return int(np.prod(self.shape))

    def value(self, w, rows=None):
        X, y = self._rows(rows)
        return losses.evaluate_loss(np.reshape(w, self.shape), X, y, self.spec)

    def gradient(self, w, rows=None):
        X, y = self._rows(rows)
        return calculus.loss_grad(np.reshape(w, self.shape), X, y, self.spec).ravel()

    def value_and_grad(self, w, rows=None):
        return self.value(w, rows), self.gradient(w, rows)

    def _rows(self, rows):
        if rows is None:
            return self.X, self.y
        return self.X[rows], self.y[rows]


def linear_objective(X, y, spec, n_classes=None):
    return LinearObjective(X, y, spec, n_classes)


def linear_scores(w, X):
    w = np.asarray(w, dtype=float)
    return np.asarray(X, dtype=float) @ (w if w.ndim == 1 else w.T)


def linear_predict(w, X):
    """sign(w @ x) with sign(0) = +1 for a vector; lowest-index argmax for a matrix."""
    s = linear_scores(w, X)
    if s.ndim == 1:
        return np.where(s >= 0, 1.0, -1.0)
    return np.argmax(s, axis=1)


# -- fully-connected networks ------------------------------------------------

@dataclass
class MlpParams:
    """Layer weights (out x in) and biases (out,), ReLU between layers."""

    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("need one bias per weight matrix and at least one layer")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise DimensionError(f"layer {i}: weight {W.shape} and bias {b.shape} disagree")
            if i and W.shape[1] != self.weights[i - 1].shape[0]:
                raise DimensionError(f"layer {i} expects {W.shape[1]} inputs, previous layer emits "
                                     f"{self.weights[i - 1].shape[0]}")
        if self.activation != "relu":
            raise ValueError("only relu hidden activations are supported")

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_outputs(self):
        return self.weights[-1].shape[0]

    def flatten(self):
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def unflatten(self, theta):
        theta = np.asarray(theta, dtype=float)
        expected = sum(W.size + b.size for W, b in zip(self.weights, self.biases))
        if theta.size != expected:
            raise DimensionError(f"expected {expected} parameters, got {theta.size}")
        Ws, bs, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            Ws.append(theta[pos:pos + W.size].reshape(W.shape))
            pos += W.size
            bs.append(theta[pos:pos + b.size].copy())
            pos += b.size
        return MlpParams(Ws, bs, self.activation)

    def copy(self):
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activation)


def init_params(sizes, scheme="uniform", seed=0):
    """Initialise a network with layer widths ``sizes = [d, h1, ..., c]``.

    ``uniform`` draws weights from U(-a, a) with a = sqrt(6 / (fan_in + fan_out));
    biases start at zero. ``zeros`` zeroes everything.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if scheme == "zeros":
            W = np.zeros((fan_out, fan_in))
        elif scheme == "uniform":
            a = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-a, a, size=(fan_out, fan_in))
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        Ws.append(W)
        bs.append(np.zeros(fan_out))
    return MlpParams(Ws, bs)


def _forward_cache(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[1]:
        raise DimensionError(f"input of shape {X.shape} does not match layer 0 "
                             f"({params.weights[0].shape[1]} inputs)")
    acts, pre = [X], []
    h = X
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        a = h @ W.T + b
        pre.append(a)
        h = a if i == last else np.maximum(a, 0.0)
        acts.append(h)
    return acts, pre


def mlp_forward(params, X):
    """Logits of shape (n, c)."""
    acts, _ = _forward_cache(params, X)
    return acts[-1]


def backprop(params, acts, pre, dlogits):
    """Push d(objective)/d(logits) back through the network.

    Returns (parameter gradients as MlpParams, d(objective)/d(input)).
    """
    gW, gb = [None] * len(params.weights), [None] * len(params.weights)
    delta = dlogits
    for i in range(len(params.weights) - 1, -1, -1):
        gW[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i]
        if i > 0:
            delta = delta * (pre[i - 1] > 0)
    return MlpParams(gW, gb, params.activation), delta


def mlp_backward(params, X, y, spec):
    """Batch-mean loss and its gradient for a multiclass loss head.

    ``y`` holds class indices.
    """
    if spec.family not in losses.MULTICLASS_FAMILIES:
        raise LabelError(f"network heads take ce, rooted_ce or focal, not {spec.family.value}")
    y = np.asarray(y, dtype=np.int64)
    acts, pre = _forward_cache(params, X)
    logits = acts[-1]
    if np.any(y < 0) or np.any(y >= logits.shape[1]):
        raise LabelError("class index out of range for the network output")
    logp = losses.true_class_log_prob(logits, y)
    if spec.family is Family.CROSS_ENTROPY:
        per = losses.ce_point(logp)
    elif spec.family is Family.ROOTED_CE:
        per = losses.rooted_ce_point(logp, spec.k, spec.m)
    else:
        per = losses.focal_point(logp, spec.gamma)
    n = logits.shape[0]
    dlogits = calculus.logit_grad(logits, y, spec) / n
    grads, _ = backprop(params, acts, pre, dlogits)
    return float(np.mean(per)), grads


class MlpObjective:
    """Objective adapter over the flattened network parameters."""

    def __init__(self, template, X, y, spec):
        self.template = template
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        self.spec = spec

    @property
    def n_samples(self):
        return self.X.shape[0]

    def value_and_grad(self, theta, rows=None):
        X, y = (self.X, self.y) if rows is None else (self.X[rows], self.y[rows])
        value, grads = mlp_backward(self.template.unflatten(theta), X, y, self.spec)
        return value, grads.flatten()


def mlp_predict(params, X):
    return np.argmax(mlp_forward(params, X), axis=1)


def evaluate(params, X, y):
    """Fraction of correct predictions.

    ``params`` is a weight vector (binary, labels +-1, sign(0) -> +1), a c x d
    matrix (argmax, lowest index wins ties) or an :class:`MlpParams`
    (argmax over logits; float +-1 labels are compared through +1 -> 0, -1 -> 1).
    """
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("cannot evaluate on empty data")
    if isinstance(params, MlpParams):
        pred = mlp_predict(params, X)
        if y.dtype.kind == "f" and np.all(np.isin(y, (-1.0, 1.0))):
            y = binary_to_index(y)
    else:
        pred = linear_predict(params, X)
    return float(np.mean(pred == y))


# -- decision surface --------------------------------------------------------

@dataclass
class DecisionGrid:
    bounds: tuple
    resolution: int
    xs: np.ndarray
    ys: np.ndarray
    prob: np.ndarray  # (resolution, resolution); prob[i, j] at (xs[j], ys[i])

    def to_csv(self, path, note=""):
        x0, x1, y0, y1 = self.bounds
        with open(path, "w") as fh:
            fh.write(f"# bounds={x0!r},{x1!r},{y0!r},{y1!r}\n")
            fh.write(f"# resolution={self.resolution}" + (f" {note}" if note else "") + "\n")
            fh.write("x,y,p1\n")
            for i, yv in enumerate(self.ys):
                for j, xv in enumerate(self.xs):
                    fh.write(f"{xv!r},{yv!r},{self.prob[i, j]!r}\n")


def decision_grid(params, bounds=(-1.5, 1.5, -1.5, 1.5), resolution=100):
    """Softmax probability of class index 1 on a uniform lattice over 2-D inputs."""
    if params.sizes[0] != 2:
        raise DimensionError("decision grids need a model with 2-D inputs")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    x0, x1, y0, y1 = (float(b) for b in bounds)
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    p = softmax(mlp_forward(params, pts), axis=1)[:, 1]
    return DecisionGrid((x0, x1, y0, y1), resolution, xs, ys, p.reshape(resolution, resolution))
