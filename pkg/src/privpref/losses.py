"""Losses over pairwise and K-wise preference data, with analytic gradients.

Batch losses are sums over samples (not means). ``X`` is an ``(n, d)`` matrix
of differential features and ``y`` holds labels in ``{0, 1}``; for the
privatized losses ``y`` is the randomized label.
"""

from typing import NamedTuple

import numpy as np

from .exceptions import DomainError
from .model import check_theta, pl_label_probs, sigmoid

__all__ = [
    "LossEval",
    "softplus",
    "nll_clear",
    "nll_rr",
    "debiased_log_scores",
    "debiased_rr_loss",
    "sgd_rr_gradient",
    "sgd_krr_gradient",
    "krr_gradient_log_probs",
]

_LOG_FLOOR = 1e-300


class LossEval(NamedTuple):
    value: float
    gradient: np.ndarray


def softplus(z):
    """``log(1 + exp(z))`` without overflow."""
    return np.logaddexp(0.0, z)


def _prepare(X, y, theta):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y))
    if X.shape[0] == 0:
        raise DomainError("loss over an empty dataset")
    if y.shape != (X.shape[0],):
        raise DomainError(f"got {X.shape[0]} features but labels of shape {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("binary labels must be 0 or 1")
    theta = check_theta(theta, X.shape[1])
    return X, y.astype(float), theta


def nll_clear(X, y, theta):
    """Negative log-likelihood of the BTL model on clear-text labels."""
    X, y, theta = _prepare(X, y, theta)
    z = X @ theta
    # -log sigma(z) = softplus(-z), -log(1 - sigma(z)) = softplus(z)
    value = np.sum(y * softplus(-z) + (1.0 - y) * softplus(z))
    grad = X.T @ (sigmoid(z) - y)
    return LossEval(float(value), grad)


def nll_rr(X, y_tilde, theta, epsilon):
    """Likelihood of randomized labels under BTL composed with randomized response.

    ``P[y~ = 1] = sigmoid(z) s + (1 - sigmoid(z)) (1 - s)`` with ``s = sigmoid(eps)``.
    """
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    X, y, theta = _prepare(X, y_tilde, theta)
    z = X @ theta
    s = sigmoid(epsilon)
    a, b = 1.0 - s, 2.0 * s - 1.0
    sz = sigmoid(z)
    p1 = np.maximum(a + b * sz, _LOG_FLOOR)
    p0 = np.maximum(a + b * (1.0 - sz), _LOG_FLOOR)
    value = -np.sum(y * np.log(p1) + (1.0 - y) * np.log(p0))
    dsz = sz * (1.0 - sz)
    # d/dz of -log p1 is -b sigma'(z) / p1, of -log p0 is +b sigma'(z) / p0
    coef = b * dsz * (-y / p1 + (1.0 - y) / p0)
    return LossEval(float(value), X.T @ coef)


def debiased_log_scores(z, epsilon):
    """Log-scores ``(log p1_hat, log p0_hat)`` of the de-biased loss at logits ``z``.

    ``log p1_hat = s log sigmoid(z) - (1 - s) log(1 - sigmoid(z))`` and
    symmetrically for label 0, with ``s = sigmoid(eps)``. Their difference is
    exactly ``z``.
    """
    z = np.asarray(z, dtype=float)
    s = sigmoid(epsilon)
    sp_pos, sp_neg = softplus(z), softplus(-z)
    log1 = -s * sp_neg + (1.0 - s) * sp_pos
    log0 = -s * sp_pos + (1.0 - s) * sp_neg
    return log1, log0


def debiased_rr_loss(X, y_tilde, theta, epsilon):
    """De-biased loss tailored to randomized response.

    The loss is ``(2 sigmoid(eps) - 1) sigma'``-strongly convex along each
    feature direction for every ``eps > 0``.
    """
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    X, y, theta = _prepare(X, y_tilde, theta)
    z = X @ theta
    s = sigmoid(epsilon)
    log1, log0 = debiased_log_scores(z, epsilon)
    value = -np.sum(y * log1 + (1.0 - y) * log0)
    sz = sigmoid(z)
    dlog1 = s * (1.0 - sz) + (1.0 - s) * sz
    dlog0 = -s * sz - (1.0 - s) * (1.0 - sz)
    coef = -(y * dlog1 + (1.0 - y) * dlog0)
    return LossEval(float(value), X.T @ coef)


def sgd_rr_gradient(x, y_tilde, theta, epsilon):
    """Per-sample stochastic gradient for one-pass SGD on randomized labels.

    ``g = (grad log p1 + grad log p0) / (e^eps + 1) - grad log p_{y~}``, where
    ``grad log p1 = (1 - sigmoid(z)) x`` and ``grad log p0 = -sigmoid(z) x``.
    Its expectation over the randomization is ``(2 sigmoid(eps) - 1)`` times
    the clear-text gradient ``(sigmoid(z) - y) x``.
    """
    if y_tilde not in (0, 1):
        raise DomainError(f"binary label must be 0 or 1, got {y_tilde!r}")
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    x = np.asarray(x, dtype=float)
    theta = check_theta(theta, x.shape[0])
    sz = sigmoid(float(x @ theta))
    inv = sigmoid(-epsilon)  # 1 / (e^eps + 1)
    own = (1.0 - sz) if y_tilde == 1 else -sz
    return ((1.0 - 2.0 * sz) * inv - own) * x


def krr_gradient_log_probs(features, theta):
    """Gradients of the top-choice log-probabilities, one row per label.

    Row ``y`` is ``phi_y - sum_j softmax_j(F theta) phi_j``.
    """
    F = np.asarray(features, dtype=float)
    p = pl_label_probs(F, theta)
    return F - p @ F


def sgd_krr_gradient(features, y_tilde, theta, epsilon, K=None):
    """K-ary analogue of :func:`sgd_rr_gradient` for top-choice feedback.

    ``features`` is ``(K, d)`` and ``y_tilde`` indexes the reported action
    (``0 .. K-1``). The result is
    ``sum_y grad log p_y / (e^eps + K - 1) - grad log p_{y~}``.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 2:
        raise DomainError("expected a (K, d) feature array")
    if K is None:
        K = F.shape[0]
    if F.shape[0] != K or K < 2:
        raise DomainError(f"expected K >= 2 feature rows, got {F.shape[0]} for K={K}")
    if int(y_tilde) != y_tilde or not 0 <= y_tilde < K:
        raise DomainError(f"label must be an integer in [0, {K}), got {y_tilde!r}")
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    theta = check_theta(theta, F.shape[1])
    G = krr_gradient_log_probs(F, theta)
    # 1 / (e^eps + K - 1) written to stay finite for large eps
    inv = np.exp(-epsilon) / (1.0 + (K - 1) * np.exp(-epsilon))
    return inv * G.sum(axis=0) - G[int(y_tilde)]
