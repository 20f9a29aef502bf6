"""Closed-form derivatives, Hessian coefficients and conditioning diagnostics.

All binary formulas are written in the margin ``z = y * w @ x``. Each
per-sample Hessian is ``coeff(z) * x x^T`` since ``y**2 == 1``. Coefficients
are assembled in log space and exponentiated last, so very negative margins
do not overflow intermediate powers and very positive margins underflow
cleanly to zero.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ._validation import check_binary, check_multiclass, check_root
from .losses import Family, LossSpec, margins, softplus, sigmoid, true_class_log_prob


# -- binary gradients --------------------------------------------------------

def logistic_point_grad(z):
    """d/dz log(1 + e^{-z}) = -(1 - sigma(z))."""
    return -sigmoid(-np.asarray(z, dtype=float))


def rlo_point_grad(z, k, m=None):
    """d/dz of m (1 + e^{-z})^{1/k}.

    Equals -(m/k) e^{-z} (1 + e^{-z})^{1/k - 1}, evaluated as one exponential.
    """
    m = k if m is None else m
    z = np.asarray(z, dtype=float)
    return -(m / k) * np.exp(-z + (1.0 / k - 1.0) * softplus(-z))


def logistic_grad(w, X, y):
    X, y, w = check_binary(X, y, w)
    dz = logistic_point_grad(margins(w, X, y))
    return (dz * y) @ X / X.shape[0]


def rlo_grad(w, X, y, k=3.0, m=None):
    k = check_root(k)
    m = k if m is None else float(m)
    X, y, w = check_binary(X, y, w)
    dz = rlo_point_grad(margins(w, X, y), k, m)
    return (dz * y) @ X / X.shape[0]


# -- multiclass gradients ----------------------------------------------------

def ce_logit_grad(logits, y):
    """Per-row gradient of -log softmax(logits)[y]: softmax - onehot."""
    g = softmax(np.asarray(logits, dtype=float), axis=1)
    g[np.arange(g.shape[0]), y] -= 1.0
    return g


def rooted_ce_logit_grad(logits, y, k, m=None):
    m = k if m is None else m
    logp = true_class_log_prob(logits, y)
    scale = (m / k) * np.exp(-logp / k)
    return scale[:, None] * ce_logit_grad(logits, y)


def focal_logit_grad(logits, y, gamma=2.0):
    logits = np.asarray(logits, dtype=float)
    logp = true_class_log_prob(logits, y)
    p = np.exp(logp)
    one_minus_p = -np.expm1(logp)
    # dF/dlogp = gamma (1-p)^(gamma-1) p logp - (1-p)^gamma
    if gamma == 0:
        dlogp = -np.ones_like(logp)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            lead = np.where(one_minus_p > 0, gamma * one_minus_p ** (gamma - 1.0) * p * logp, 0.0)
        dlogp = lead - one_minus_p ** gamma
    # d logp / dlogits = onehot - softmax
    return -dlogp[:, None] * ce_logit_grad(logits, y)


def logit_grad(logits, y, spec):
    if spec.family is Family.CROSS_ENTROPY:
        return ce_logit_grad(logits, y)
    if spec.family is Family.ROOTED_CE:
        return rooted_ce_logit_grad(logits, y, spec.k, spec.m)
    if spec.family is Family.FOCAL:
        return focal_logit_grad(logits, y, spec.gamma)
    raise ValueError(f"{spec.family.value} is not a multiclass loss")


def ce_grad(W, X, y):
    X, y, W = check_multiclass(X, y, W)
    return ce_logit_grad(X @ W.T, y).T @ X / X.shape[0]


def rooted_ce_grad(W, X, y, k=3.0, m=None):
    k = check_root(k)
    X, y, W = check_multiclass(X, y, W)
    return rooted_ce_logit_grad(X @ W.T, y, k, m).T @ X / X.shape[0]


def focal_grad(W, X, y, gamma=2.0):
    X, y, W = check_multiclass(X, y, W)
    return focal_logit_grad(X @ W.T, y, gamma).T @ X / X.shape[0]


def loss_grad(params, X, y, spec):
    f = spec.family
    if f is Family.LOGISTIC:
        return logistic_grad(params, X, y)
    if f is Family.RLO:
        return rlo_grad(params, X, y, spec.k, spec.m)
    if f is Family.CROSS_ENTROPY:
        return ce_grad(params, X, y)
    if f is Family.ROOTED_CE:
        return rooted_ce_grad(params, X, y, spec.k, spec.m)
    return focal_grad(params, X, y, spec.gamma)


# -- Hessian coefficients ----------------------------------------------------

def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def lr_hessian_coeff(z):
    """sigma(z) (1 - sigma(z)), in (0, 1/4]."""
    z = np.asarray(z, dtype=float)
    return _scalar_or_array(np.exp(-softplus(z) - softplus(-z)))


def _log_rlo_base(z, k):
    # log of e^{-z} (1 + e^{-z})^{1/k - 1}
    return -z + (1.0 / k - 1.0) * softplus(-z)


def rlo_hessian_coeff(z, k):
    """Curvature coefficient of k (1 + e^{-z})^{1/k}.

    e^{-z} (1+e^{-z})^{1/k-1} [1/k + (1-1/k) / (1+e^{-z})]; strictly
    positive for every finite z when k > 1.
    """
    k = check_root(k)
    z = np.asarray(z, dtype=float)
    bracket = 1.0 / k + (1.0 - 1.0 / k) * sigmoid(z)
    return _scalar_or_array(np.exp(_log_rlo_base(z, k) + np.log(bracket)))


def rlo_hessian_under_coeff(z, k):
    """Lower bound on rlo_hessian_coeff that drops the second bracket term."""
    k = check_root(k)
    z = np.asarray(z, dtype=float)
    return _scalar_or_array(np.exp(_log_rlo_base(z, k) - np.log(k)))


def conditioning_ratio(z, k):
    """(1 + e^{-z})^{1 + 1/k} / k: under-approximated RLO curvature over LR curvature."""
    k = check_root(k)
    z = np.asarray(z, dtype=float)
    return _scalar_or_array(np.exp((1.0 + 1.0 / k) * softplus(-z) - np.log(k)))


def sufficient_condition(z, k):
    """k <= 1 + e^{-z}; guarantees conditioning_ratio(z, k) > 1."""
    z = np.asarray(z, dtype=float)
    out = np.log(k) <= softplus(-z)
    return bool(out) if np.ndim(out) == 0 else out


def main_text_condition(z, k):
    """k <= exp(l) with l = (1 + e^{-z})^{1/k}.

    This alternative statement of the sufficiency test is not equivalent
    to :func:`sufficient_condition`; it is exposed for comparison only.
    """
    z = np.asarray(z, dtype=float)
    out = np.log(k) <= np.exp(softplus(-z) / k)
    return bool(out) if np.ndim(out) == 0 else out


def legacy_g(z, k):
    """sigma(z) * l(z), l = (1+e^{-z})^{1/k}. Not the true gradient scale; kept for reference."""
    z = np.asarray(z, dtype=float)
    return _scalar_or_array(sigmoid(z) * np.exp(softplus(-z) / k))


def legacy_h(z, k):
    """l(z) sigma(z) [1 - sigma(z)(1 - 1/k)]. Disagrees with finite differences away from z = 0."""
    z = np.asarray(z, dtype=float)
    s = sigmoid(z)
    return _scalar_or_array(np.exp(softplus(-z) / k) * s * (1.0 - s * (1.0 - 1.0 / k)))


# -- Hessian assembly and conditioning --------------------------------------

@dataclass
class HessianMatrix:
    matrix: np.ndarray
    family: Family
    k: float = None
    l2_lambda: float = 0.0


def assemble_hessian(w, X, y, spec, l2_lambda=0.0):
    """(1/n) sum_i coeff(z_i) x_i x_i^T + lambda I for logistic or RLO objectives."""
    X, y, w = check_binary(X, y, w)
    z = margins(w, X, y)
    if spec.family is Family.LOGISTIC:
        coeff = lr_hessian_coeff(z)
    elif spec.family is Family.RLO:
        coeff = (spec.m / spec.k) * rlo_hessian_coeff(z, spec.k)
    else:
        raise ValueError("Hessians are assembled for logistic and RLO objectives only")
    coeff = np.atleast_1d(coeff)
    H = (X * coeff[:, None]).T @ X / X.shape[0]
    H = 0.5 * (H + H.T)
    H += l2_lambda * np.eye(X.shape[1])
    k = spec.k if spec.family is Family.RLO else None
    return HessianMatrix(H, spec.family, k, float(l2_lambda))


def _round_robin(d):
    """Pairings covering every (p, q) once per sweep, d/2 disjoint pairs per round."""
    players = list(range(d + (d % 2)))
    rounds = []
    for _ in range(len(players) - 1):
        half = len(players) // 2
        pairs = [(players[i], players[-1 - i]) for i in range(half)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < d and q < d]
        rounds.append(np.array(pairs, dtype=np.int64).reshape(-1, 2))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigenvalues(A, tol=1e-14, max_sweeps=60):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied a round at a time over disjoint index pairs
    (round-robin ordering), so the sequence of operations depends only on
    the matrix size. Returned in ascending order.
    """
    A = np.array(A, dtype=float)
    d = A.shape[0]
    if d == 1:
        return A.diagonal().copy()
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(d)
    rounds = _round_robin(d)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for pairs in rounds:
            if pairs.size == 0:
                continue
            p, q = pairs[:, 0], pairs[:, 1]
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
    return np.sort(np.diag(A))


def condition_number(H, singular_rtol=1e-12):
    """lambda_max / lambda_min; inf when lambda_min <= singular_rtol * lambda_max."""
    M = H.matrix if isinstance(H, HessianMatrix) else np.asarray(H, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("condition_number requires a symmetric matrix")
    eig = jacobi_eigenvalues(0.5 * (M + M.T))
    lo, hi = eig[0], eig[-1]
    if hi <= 0 or lo <= singular_rtol * hi:
        return float("inf")
    return float(hi / lo)


# -- finite-difference oracle -----------------------------------------------

def finite_diff_grad(f, w, h=1e-6):
    """Central differences (f(w + h e_j) - f(w - h e_j)) / 2h for every coordinate of w."""
    w = np.array(w, dtype=float)
    g = np.empty_like(w)
    flat, gflat = w.reshape(-1), g.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        fp = f(w)
        flat[j] = orig - h
        fm = f(w)
        flat[j] = orig
        gflat[j] = (fp - fm) / (2.0 * h)
    return g


# -- per-sample report -------------------------------------------------------

REPORT_COLUMNS = ("index", "z", "coeff_lr", "coeff_rlo", "coeff_rlo_under", "ratio", "sufficient")


@dataclass
class ConditioningReport:
    k: float
    z: np.ndarray
    coeff_lr: np.ndarray
    coeff_rlo: np.ndarray
    coeff_rlo_under: np.ndarray
    ratio: np.ndarray
    sufficient: np.ndarray

    def __len__(self):
        return len(self.z)

    @property
    def fraction_ratio_above_one(self):
        return float(np.mean(self.ratio > 1.0))

    def rows(self):
        for i in range(len(self.z)):
            yield (i, self.z[i], self.coeff_lr[i], self.coeff_rlo[i],
                   self.coeff_rlo_under[i], self.ratio[i], bool(self.sufficient[i]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for i, z, a, b, c, r, s in self.rows():
                writer.writerow([i, repr(float(z)), repr(float(a)), repr(float(b)),
                                 repr(float(c)), repr(float(r)), "true" if s else "false"])


def conditioning_report(w, X, y, k):
    """Per-sample curvature coefficients and conditioning ratio at parameters ``w``."""
    k = check_root(k)
    X, y, w = check_binary(X, y, w)
    z = margins(w, X, y)
    return ConditioningReport(
        k=k,
        z=z,
        coeff_lr=np.atleast_1d(lr_hessian_coeff(z)),
        coeff_rlo=np.atleast_1d(rlo_hessian_coeff(z, k)),
        coeff_rlo_under=np.atleast_1d(rlo_hessian_under_coeff(z, k)),
        ratio=np.atleast_1d(conditioning_ratio(z, k)),
        sufficient=np.atleast_1d(sufficient_condition(z, k)),
    )
