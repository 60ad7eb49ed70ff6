"""Preference models over a linear reward and the parameter space they live in.

Pairwise feedback is described by a differential feature
``x = phi(s, a1) - phi(s, a0)`` and a label ``y`` in ``{0, 1}`` with
``P[y = 1 | x] = F(x @ theta)``, where ``F`` is the logistic sigmoid (BTL) or
the standard normal CDF (Thurstone). K-wise feedback picks the top action out
of ``K`` with softmax probabilities (top-choice Plackett-Luce).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import DomainError

__all__ = [
    "ParamSpace",
    "sigmoid",
    "log_sigmoid",
    "btl_label_prob",
    "pl_label_probs",
    "thurstone_label_prob",
    "gamma_constant",
    "pl_gamma_constant",
    "empirical_covariance",
    "pairwise_covariance",
    "min_eigenvalue",
    "check_theta",
]


@dataclass(frozen=True)
class ParamSpace:
    """Centered ball ``{theta : sum(theta) = 0, ||theta|| <= B}`` in ``R^d``.

    ``L`` bounds the norm of a single action feature, so differential
    features have norm at most ``2 L``.
    """

    d: int
    B: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d!r}")
        if not self.B > 0:
            raise DomainError(f"B must be positive, got {self.B!r}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L!r}")

    def contains(self, theta, atol=1e-9):
        theta = np.asarray(theta, dtype=float)
        return (
            theta.shape == (self.d,)
            and abs(theta.sum()) <= atol
            and np.linalg.norm(theta) <= self.B + atol
        )


def _finite(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("sigmoid argument must be finite")
    return z


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def sigmoid(z):
    """Logistic function ``1 / (1 + exp(-z))``, overflow-free for any finite z."""
    z = _finite(z)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _scalar_or_array(out)


def log_sigmoid(z):
    """``log(sigmoid(z))`` computed as ``-log(1 + exp(-z))``."""
    z = _finite(z)
    return _scalar_or_array(-np.logaddexp(0.0, -z))


def _score(x, theta):
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape[-1:] != theta.shape:
        raise DomainError(
            f"feature dimension {x.shape[-1:]} does not match parameter {theta.shape}"
        )
    return x @ theta


def btl_label_prob(x, theta):
    """Probability of label 1 under the BTL model, ``sigmoid(x @ theta)``.

    ``x`` may be a single feature vector or an ``(n, d)`` matrix.
    """
    return sigmoid(_score(x, theta))


def thurstone_label_prob(x, theta):
    """Probability of label 1 under the Thurstone model, ``Phi(x @ theta)``."""
    return _scalar_or_array(ndtr(_score(x, theta)))


def pl_label_probs(features, theta):
    """Top-choice probabilities for ``K`` actions with features ``(..., K, d)``.

    Returns an array of shape ``(..., K)`` whose last axis sums to one.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim < 2 or features.shape[-2] < 2:
        raise DomainError("need at least two actions to compare")
    s = _score(features, theta)
    s = s - s.max(axis=-1, keepdims=True)
    w = np.exp(s)
    return w / w.sum(axis=-1, keepdims=True)


def gamma_constant(L, B):
    """Lower bound ``1 / (2 + exp(-2LB) + exp(2LB))`` on the sigmoid slope.

    Valid for ``|x @ theta| <= 2 L B``.
    """
    if L < 0 or B < 0:
        raise DomainError("L and B must be nonnegative")
    t = 2.0 * L * B
    # 1 / (2 + e^t + e^-t) = e^-t / (1 + e^-t)^2, finite for large t
    e = np.exp(-t)
    return float(e / (1.0 + e) ** 2)


def pl_gamma_constant(L, B):
    """Curvature constant ``exp(-4LB) / 2`` for the top-choice K-wise loss."""
    if L < 0 or B < 0:
        raise DomainError("L and B must be nonnegative")
    return float(np.exp(-4.0 * L * B) / 2.0)


def empirical_covariance(X):
    """Second-moment matrix ``(1/n) sum_i x_i x_i^T`` of the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise DomainError("covariance of an empty sample")
    S = X.T @ X / X.shape[0]
    return (S + S.T) / 2.0


def pairwise_covariance(features):
    """Average of ``x x^T`` over all ordered action pairs ``x = phi_k - phi_j``.

    ``features`` has shape ``(n, K, d)``. This is the coverage matrix used for
    K-wise data; for ``K = 2`` it is half the covariance of the differences.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 3 or F.shape[0] == 0:
        raise DomainError("expected a nonempty (n, K, d) feature array")
    n, K, _ = F.shape
    # sum_{k,j} (f_k - f_j)(f_k - f_j)^T = 2K sum_k f_k f_k^T - 2 (sum f)(sum f)^T
    tot = F.sum(axis=1)
    S = 2.0 * K * np.einsum("nki,nkj->ij", F, F) - 2.0 * tot.T @ tot
    S /= n * K * K
    return (S + S.T) / 2.0


def min_eigenvalue(m):
    """Smallest eigenvalue of a symmetric matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("expected a square matrix")
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-9:
        raise DomainError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(m)[0])


def check_theta(theta, d=None):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or (d is not None and theta.shape[0] != d):
        raise DomainError(f"parameter must be a vector of length {d}, got {theta.shape}")
    return theta
