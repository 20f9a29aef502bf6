"""Loss families over linear-model outputs.

Every objective is the mean over samples of a per-point penalty. The
per-point evaluators work on margins ``z = y * w @ x`` (binary) or on the
log-probability of the true class (multiclass) so the calculus and model
modules can reuse them.

Rooted losses are evaluated in log space, ``m * exp(softplus(-z) / k)``,
which stays finite for margins far below zero where the naive power
overflows.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import log_softmax

from ._validation import check_binary, check_multiclass, check_root


class Family(str, Enum):
    LOGISTIC = "logistic"
    RLO = "rlo"
    CROSS_ENTROPY = "ce"
    ROOTED_CE = "rooted_ce"
    FOCAL = "focal"


BINARY_FAMILIES = (Family.LOGISTIC, Family.RLO)
MULTICLASS_FAMILIES = (Family.CROSS_ENTROPY, Family.ROOTED_CE, Family.FOCAL)
ROOTED_FAMILIES = (Family.RLO, Family.ROOTED_CE)


@dataclass(frozen=True)
class LossSpec:
    """A loss family plus its parameters.

    ``k`` and ``m`` apply to the rooted families only (``m`` defaults to
    ``k``); ``gamma`` applies to focal loss only.
    """

    family: Family
    k: float = 3.0
    m: float = None
    gamma: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family in ROOTED_FAMILIES:
            check_root(self.k)
            if self.m is None:
                object.__setattr__(self, "m", float(self.k))
            if not self.m > 0:
                raise ValueError(f"multiplier m must be positive, got {self.m}")
        if self.gamma < 0:
            raise ValueError(f"focal gamma must be nonnegative, got {self.gamma}")

    @property
    def is_binary(self):
        return self.family in BINARY_FAMILIES

    def describe(self):
        if self.family in ROOTED_FAMILIES:
            return f"{self.family.value}(k={self.k:g},m={self.m:g})"
        if self.family is Family.FOCAL:
            return f"focal(gamma={self.gamma:g})"
        return self.family.value


def softplus(t):
    """log(1 + e^t) without overflow; returns a float for scalar input."""
    out = np.logaddexp(0.0, t)
    return float(out) if np.ndim(out) == 0 else out


def sigmoid(t):
    # exp(-softplus(-t)) is exact in both tails
    out = np.exp(-np.logaddexp(0.0, -np.asarray(t, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


# -- per-point penalties -----------------------------------------------------

def logistic_point(z):
    return softplus(-np.asarray(z, dtype=float))


def rlo_point(z, k, m=None):
    """m * (1 + e^{-z})^{1/k} for margins z."""
    m = k if m is None else m
    return m * np.exp(softplus(-np.asarray(z, dtype=float)) / k)


def true_class_log_prob(logits, y):
    logp = log_softmax(np.asarray(logits, dtype=float), axis=1)
    return logp[np.arange(logp.shape[0]), y]


def ce_point(logp):
    return -np.asarray(logp)


def rooted_ce_point(logp, k, m=None):
    """m * p^{-1/k}; with two classes and logits (z, 0) this is rlo_point(z)."""
    m = k if m is None else m
    return m * np.exp(-np.asarray(logp) / k)


def focal_point(logp, gamma=2.0):
    logp = np.asarray(logp, dtype=float)
    one_minus_p = -np.expm1(logp)
    return -(one_minus_p ** gamma) * logp


def margins(w, X, y):
    return y * (X @ w)


# -- averaged objectives -----------------------------------------------------

def logistic_loss(w, X, y):
    X, y, w = check_binary(X, y, w)
    return float(np.mean(logistic_point(margins(w, X, y))))


def rlo_loss(w, X, y, k=3.0, m=None):
    k = check_root(k)
    m = k if m is None else float(m)
    if not m > 0:
        raise ValueError("multiplier m must be positive")
    X, y, w = check_binary(X, y, w)
    return float(np.mean(rlo_point(margins(w, X, y), k, m)))


def ce_loss(W, X, y):
    X, y, W = check_multiclass(X, y, W)
    return float(np.mean(ce_point(true_class_log_prob(X @ W.T, y))))


def rooted_ce_loss(W, X, y, k=3.0, m=None):
    k = check_root(k)
    m = k if m is None else float(m)
    X, y, W = check_multiclass(X, y, W)
    return float(np.mean(rooted_ce_point(true_class_log_prob(X @ W.T, y), k, m)))


def focal_loss(W, X, y, gamma=2.0):
    if gamma < 0:
        raise ValueError("focal gamma must be nonnegative")
    X, y, W = check_multiclass(X, y, W)
    return float(np.mean(focal_point(true_class_log_prob(X @ W.T, y), gamma)))


def evaluate_loss(params, X, y, spec):
    """Dispatch on ``spec.family``."""
    f = spec.family
    if f is Family.LOGISTIC:
        return logistic_loss(params, X, y)
    if f is Family.RLO:
        return rlo_loss(params, X, y, spec.k, spec.m)
    if f is Family.CROSS_ENTROPY:
        return ce_loss(params, X, y)
    if f is Family.ROOTED_CE:
        return rooted_ce_loss(params, X, y, spec.k, spec.m)
    return focal_loss(params, X, y, spec.gamma)
