"""Error metrics, power-law rate fits and policy suboptimality."""

import math

import numpy as np

from .exceptions import DomainError
from .model import gamma_constant
from .solvers import greedy_policy_action

__all__ = [
    "l2_error",
    "seminorm_error",
    "default_seminorm_lambda",
    "rate_fit",
    "suboptimality_gap",
]


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def l2_error(theta_hat, theta_star):
    a, b = _pair(theta_hat, theta_star)
    return float(np.linalg.norm(a - b))


def seminorm_error(theta_hat, theta_star, sigma_d, lam):
    """``sqrt(D^T (Sigma_D + lam I) D)`` with ``D = theta_hat - theta_star``."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    a, b = _pair(theta_hat, theta_star)
    S = np.asarray(sigma_d, dtype=float)
    if S.shape != (a.size, a.size):
        raise DomainError(f"covariance must be {a.size}x{a.size}")
    delta = a - b
    q = float(delta @ S @ delta) + lam * float(delta @ delta)
    return math.sqrt(max(q, 0.0))


def default_seminorm_lambda(epsilon, d, n, L, B, alpha=0.1):
    """Regularization ``((e^eps+1)/(e^eps-1))^2 (d + log(1/alpha)) / (B^2 gamma^2 n)``.

    This is the choice under which the de-biased estimator's semi-norm bound
    is tight; it is infinite at ``epsilon = 0``.
    """
    if epsilon <= 0:
        return math.inf
    ratio = 1.0 / math.tanh(epsilon / 2.0)  # (e^eps + 1) / (e^eps - 1)
    g = gamma_constant(L, B)
    return ratio * ratio * (d + math.log(1.0 / alpha)) / (B * B * g * g * n)


def rate_fit(points):
    """Least-squares slope of ``log(error)`` against ``log(n)``."""
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise DomainError("need at least three points to fit a rate")
    if any(n <= 0 or e <= 0 for n, e in pts):
        raise DomainError("rate fit needs positive n and errors")
    lx = np.log([n for n, _ in pts])
    ly = np.log([e for _, e in pts])
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def suboptimality_gap(theta_hat, theta_star, eval_states):
    """Mean reward shortfall of the greedy policy under ``theta_hat``.

    ``eval_states`` is a sequence of ``(n_actions, d)`` feature arrays, one
    per state; rewards are measured with ``theta_star``.
    """
    if len(eval_states) == 0:
        raise DomainError("need at least one evaluation state")
    theta_star = np.asarray(theta_star, dtype=float)
    gaps = []
    for A in eval_states:
        A = np.asarray(A, dtype=float)
        r = A @ theta_star
        gaps.append(r.max() - r[greedy_policy_action(theta_hat, A)])
    return float(np.mean(gaps))
