"""Estimators of the reward parameter, as plain functions over arrays.

Batch estimators minimise a convex loss over the centered ball with projected
gradient descent. One-pass estimators run projected SGD over the samples in
order. The scikit-learn style classes in :mod:`privpref.estimators` wrap
these functions.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import log_ndtr

from . import losses
from .exceptions import DomainError, ModeError
from .model import (
    empirical_covariance,
    gamma_constant,
    min_eigenvalue,
    pairwise_covariance,
    pl_gamma_constant,
    sigmoid,
)
from .privacy import (
    CENTRAL_STANDARD,
    LOCAL_LABEL,
    PrivacyBudget,
    as_generator,
    central_noise_sigma,
    sample_gaussian_vector,
    standard_dp_beta_floor,
)

__all__ = [
    "OptimizerConfig",
    "EstimatorResult",
    "OutsideGuaranteeWarning",
    "project_theta_B",
    "projected_gradient_descent",
    "fit_mle_clear",
    "fit_mle_rr",
    "fit_debiased_rr",
    "sgd_rr",
    "sgd_krr",
    "fit_objective_perturbation",
    "greedy_policy_action",
    "default_beta",
    "estimate_kappa",
    "sgd_step_sizes",
]

SCHEDULES = ("inverse-t", "constant", "fixed-eta")
KAPPA_FLOOR = 1e-6
FIXED_ETA = 0.1

_ARMIJO = 1e-4
_MIN_STEP_RATIO = 1e-30


class OutsideGuaranteeWarning(UserWarning):
    """The estimator ran in a regime its error guarantee does not cover."""


@dataclass
class OptimizerConfig:
    """Knobs shared by the batch and one-pass solvers.

    ``step_schedule`` applies to SGD only:

    * ``inverse-t``: ``eta_t = 1 / (gamma_eps * kappa * t)``, with
      ``gamma_eps = gamma * (2 sigmoid(eps) - 1)`` (``(e^eps - 1) / (e^eps + K - 1)``
      for K-wise data).
    * ``constant``: ``eta_t = 1 / (gamma * kappa)``.
    * ``fixed-eta``: ``eta_t = 0.1``.

    ``step_size`` replaces the schedule's base constant (the numerator for
    ``inverse-t``). ``kappa_override`` and ``gamma_override`` replace the
    data-driven coverage estimate and the worst-case curvature constant.
    """

    max_iterations: int = 100_000
    step_schedule: str = "inverse-t"
    step_size: Optional[float] = None
    gradient_tolerance: float = 1e-8
    kappa_override: Optional[float] = None
    gamma_override: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be positive")
        if self.step_schedule not in SCHEDULES:
            raise DomainError(f"unknown step schedule {self.step_schedule!r}; expected one of {SCHEDULES}")
        if not self.gradient_tolerance > 0:
            raise DomainError("gradient_tolerance must be positive")
        for name in ("step_size", "kappa_override", "gamma_override"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive when given")


@dataclass
class EstimatorResult:
    theta_hat: np.ndarray
    iterations_used: int
    final_gradient_norm: float
    budget_spent: Optional[PrivacyBudget]
    converged: bool = True
    notes: dict = field(default_factory=dict)


def project_theta_B(v, B):
    """Euclidean projection onto ``{theta : sum(theta) = 0, ||theta|| <= B}``.

    Centering then radial shrinking is exact because the hyperplane passes
    through the center of the ball.
    """
    if not B > 0:
        raise DomainError("B must be positive")
    v = np.asarray(v, dtype=float)
    p = v - v.mean()
    norm = np.linalg.norm(p)
    if norm > B:
        p *= B / norm
    return p


def projected_gradient_descent(objective, x0, B, smoothness, cfg):
    """Minimise ``objective`` over the centered ball of radius ``B``.

    ``objective(theta)`` returns ``(value, gradient)``. Steps start at
    ``1 / smoothness`` and are halved until the Armijo condition (constant
    1e-4) holds. Stops once the gradient-mapping norm is at most
    ``cfg.gradient_tolerance``.

    Returns ``(theta, iterations, gradient_mapping_norm, converged)``.
    """
    x = project_theta_B(x0, B)
    f, g = objective(x)
    step = 1.0 / max(float(smoothness), 1e-12)
    min_step = step * _MIN_STEP_RATIO
    gnorm = np.inf
    for it in range(cfg.max_iterations):
        while True:
            x_new = project_theta_B(x - step * g, B)
            gnorm = float(np.linalg.norm(x - x_new) / step)
            if gnorm <= cfg.gradient_tolerance:
                return x, it, gnorm, True
            f_new, g_new = objective(x_new)
            # slack absorbs rounding in f once the decrease drops below ulp(f)
            slack = 64 * np.finfo(float).eps * max(1.0, abs(f))
            if f_new <= f - _ARMIJO * step * gnorm * gnorm + slack:
                break
            step *= 0.5
            if step < min_step:
                return x, it, gnorm, False
        x, f, g = x_new, f_new, g_new
    return x, cfg.max_iterations, gnorm, False


def _batch_setup(X, y, space):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise DomainError("cannot fit on an empty dataset")
    if X.shape[1] != space.d:
        raise DomainError(f"features have dimension {X.shape[1]}, parameter space has {space.d}")
    return X, y


def _max_curvature(X):
    """Largest eigenvalue of ``sum_i x_i x_i^T``."""
    return float(np.linalg.eigvalsh(X.T @ X)[-1])


def _solve(objective, space, cfg, smoothness):
    return projected_gradient_descent(objective, np.zeros(space.d), space.B, smoothness, cfg)


def fit_mle_clear(X, y, space, cfg=None):
    """Maximum-likelihood estimate from clear-text labels (not private)."""
    cfg = cfg or OptimizerConfig()
    X, y = _batch_setup(X, y, space)
    theta, iters, gnorm, ok = _solve(
        lambda t: losses.nll_clear(X, y, t), space, cfg, 0.25 * _max_curvature(X)
    )
    return EstimatorResult(theta, iters, gnorm, None, ok)


def fit_mle_rr(X, y_tilde, epsilon, space, cfg=None):
    """Maximum likelihood of randomized labels under BTL composed with RR.

    Its error bound needs ``epsilon > 2 L B``; below that the estimate is
    still computed but flagged in ``notes`` and an
    :class:`OutsideGuaranteeWarning` is emitted.
    """
    cfg = cfg or OptimizerConfig()
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    X, y = _batch_setup(X, y_tilde, space)
    notes = {}
    if epsilon <= 2.0 * space.L * space.B:
        notes["outside_guarantee"] = f"epsilon={epsilon} <= 2LB={2.0 * space.L * space.B}"
        warnings.warn(
            "noisy-likelihood estimator has no error guarantee for epsilon <= 2LB",
            OutsideGuaranteeWarning,
            stacklevel=2,
        )
    theta, iters, gnorm, ok = _solve(
        lambda t: losses.nll_rr(X, y, t, epsilon), space, cfg, 0.25 * _max_curvature(X)
    )
    return EstimatorResult(theta, iters, gnorm, PrivacyBudget(epsilon), ok, notes)


def fit_debiased_rr(X, y_tilde, epsilon, space, cfg=None):
    """Minimiser of the de-biased randomized-response loss over the ball."""
    cfg = cfg or OptimizerConfig()
    if not epsilon > 0:
        raise DomainError("the de-biased estimator needs epsilon > 0")
    X, y = _batch_setup(X, y_tilde, space)
    curv = (2.0 * sigmoid(epsilon) - 1.0) * 0.25 * _max_curvature(X)
    theta, iters, gnorm, ok = _solve(
        lambda t: losses.debiased_rr_loss(X, y, t, epsilon), space, cfg, curv
    )
    return EstimatorResult(theta, iters, gnorm, PrivacyBudget(epsilon), ok)


def estimate_kappa(X):
    """Coverage estimate: smallest eigenvalue of the sample covariance, floored."""
    return max(min_eigenvalue(empirical_covariance(X)), KAPPA_FLOOR)


def sgd_step_sizes(n, cfg, gamma, kappa, scale):
    """Learning rates ``eta_1 .. eta_n`` for one pass of projected SGD.

    ``scale`` is the factor by which randomization shrinks the expected
    gradient (``2 sigmoid(eps) - 1`` for RR).
    """
    t = np.arange(1, n + 1, dtype=float)
    if cfg.step_schedule == "fixed-eta":
        return np.full(n, cfg.step_size or FIXED_ETA)
    if cfg.step_schedule == "constant":
        return np.full(n, cfg.step_size or 1.0 / (gamma * kappa))
    if cfg.step_size is not None:
        return cfg.step_size / t
    if scale <= 0:
        raise DomainError("the inverse-t schedule is undefined at epsilon = 0; pass step_size")
    return 1.0 / (gamma * scale * kappa * t)


def _scalar_sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _probit_grad_coefs(z):
    """``d/dz log Phi(z)`` and ``d/dz log Phi(-z)``."""
    log_pdf = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)
    return math.exp(log_pdf - log_ndtr(z)), -math.exp(log_pdf - log_ndtr(-z))


def sgd_rr(X, y_tilde, epsilon, space, cfg=None, link="logistic"):
    """One pass of projected SGD on randomized pairwise labels.

    Starts at zero and applies, for each sample in order,
    ``theta <- project(theta - eta_t * g_t)`` with the de-biased stochastic
    gradient of :func:`privpref.losses.sgd_rr_gradient`. ``link="probit"``
    runs the same update for Thurstone feedback and requires
    ``cfg.gamma_override`` for schedules that use the curvature constant.
    """
    cfg = cfg or OptimizerConfig()
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    if link not in ("logistic", "probit"):
        raise DomainError(f"unknown link {link!r}")
    X, y = _batch_setup(X, y_tilde, space)
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("binary labels must be 0 or 1")
    n = X.shape[0]
    if cfg.gamma_override is not None:
        gamma = cfg.gamma_override
    elif link == "probit" and cfg.step_schedule != "fixed-eta" and cfg.step_size is None:
        raise DomainError("Thurstone SGD needs gamma_override; no closed-form curvature constant")
    else:
        gamma = gamma_constant(space.L, space.B)
    kappa = cfg.kappa_override or estimate_kappa(X)
    scale = 2.0 * sigmoid(epsilon) - 1.0
    etas = sgd_step_sizes(n, cfg, gamma, kappa, scale)

    inv = sigmoid(-epsilon)  # 1 / (e^eps + 1)
    B = space.B
    theta = np.zeros(space.d)
    c = 0.0
    rows = list(X)
    for t in range(n):
        x = rows[t]
        z = float(x @ theta)
        if link == "logistic":
            sz = _scalar_sigmoid(z)
            d1, d0 = 1.0 - sz, -sz
        else:
            d1, d0 = _probit_grad_coefs(z)
        own = d1 if y[t] == 1 else d0
        c = (d1 + d0) * inv - own
        v = theta - (etas[t] * c) * x
        v -= v.sum() / v.size
        r = math.sqrt(float(v @ v))
        if r > B:
            v *= B / r
        theta = v
    gnorm = abs(c) * float(np.linalg.norm(X[-1]))
    notes = {"gamma": gamma, "kappa": kappa, "schedule": cfg.step_schedule}
    return EstimatorResult(theta, n, gnorm, PrivacyBudget(epsilon), True, notes)


def sgd_krr(features, y_tilde, K, epsilon, space, cfg=None):
    """One pass of projected SGD on K-wise top-choice labels privatized by K-RR.

    ``features`` has shape ``(n, K, d)`` and labels index actions ``0 .. K-1``.
    """
    cfg = cfg or OptimizerConfig()
    F = np.asarray(features, dtype=float)
    if F.ndim != 3 or F.shape[0] == 0:
        raise DomainError("expected a nonempty (n, K, d) feature array")
    n, k_found, d = F.shape
    if K < 2 or k_found != K:
        raise DomainError(f"features carry {k_found} actions, expected K={K} >= 2")
    if d != space.d:
        raise DomainError(f"features have dimension {d}, parameter space has {space.d}")
    if not epsilon >= 0:
        raise DomainError("epsilon must be nonnegative")
    y = np.asarray(y_tilde)
    if y.shape != (n,) or not np.all((y >= 0) & (y < K) & (y == np.round(y))):
        raise DomainError(f"labels must be integers in [0, {K})")
    y = y.astype(np.int64)

    gamma = cfg.gamma_override or pl_gamma_constant(space.L, space.B)
    kappa = cfg.kappa_override or max(min_eigenvalue(pairwise_covariance(F)), KAPPA_FLOOR)
    e = math.exp(-epsilon)
    scale = (1.0 - e) / (1.0 + (K - 1) * e)  # (e^eps - 1) / (e^eps + K - 1)
    etas = sgd_step_sizes(n, cfg, gamma, kappa, scale)

    inv = e / (1.0 + (K - 1) * e)
    B = space.B
    theta = np.zeros(d)
    gnorm = 0.0
    for t in range(n):
        Ft = F[t]
        s = Ft @ theta
        w = np.exp(s - s.max())
        p = w / w.sum()
        G = Ft - p @ Ft
        g = inv * G.sum(axis=0) - G[y[t]]
        gnorm = float(np.linalg.norm(g))
        v = theta - etas[t] * g
        v -= v.mean()
        r = math.sqrt(float(v @ v))
        if r > B:
            v *= B / r
        theta = v
    notes = {"gamma": gamma, "kappa": kappa, "schedule": cfg.step_schedule}
    return EstimatorResult(theta, n, gnorm, PrivacyBudget(epsilon), True, notes)


def default_beta(n, space, budget):
    """Regularizer ``sqrt(n) / B``, raised to ``4 L^2 / eps`` under standard DP."""
    beta = math.sqrt(n) / space.B
    if budget.mode == CENTRAL_STANDARD:
        beta = max(beta, standard_dp_beta_floor(space.L, budget.epsilon))
    return beta


def fit_objective_perturbation(X, y, space, budget, beta=None, rng=None, cfg=None, sigma=None):
    """Central-model estimator: minimise ``nll + (beta/2)||theta||^2 + w @ theta``.

    ``w ~ N(0, sigma^2 I)`` with ``sigma`` calibrated from ``budget`` unless
    given explicitly. The privacy guarantee covers the exact minimiser; the
    returned iterate is an approximation to it, which ``notes`` records.
    """
    cfg = cfg or OptimizerConfig()
    if not isinstance(budget, PrivacyBudget) or budget.mode == LOCAL_LABEL:
        raise ModeError("objective perturbation needs a central privacy budget")
    X, y = _batch_setup(X, y, space)
    n = X.shape[0]
    if sigma is None:
        sigma = central_noise_sigma(space.L, budget)
    if beta is None:
        beta = default_beta(n, space, budget)
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if budget.mode == CENTRAL_STANDARD and beta < standard_dp_beta_floor(space.L, budget.epsilon):
        warnings.warn("beta below the standard-DP floor 4L^2/eps", OutsideGuaranteeWarning, stacklevel=2)
    w = sample_gaussian_vector(space.d, sigma, as_generator(rng))

    def objective(t):
        v, g = losses.nll_clear(X, y, t)
        return v + 0.5 * beta * float(t @ t) + float(w @ t), g + beta * t + w

    theta, iters, gnorm, ok = _solve(objective, space, cfg, 0.25 * _max_curvature(X) + beta)
    notes = {"beta": beta, "sigma": sigma, "approximate_minimizer": True}
    return EstimatorResult(theta, iters, gnorm, budget, ok, notes)


def greedy_policy_action(theta_hat, action_features):
    """Index of the action with the highest estimated reward; lowest index wins ties."""
    A = np.asarray(action_features, dtype=float)
    if A.ndim != 2 or A.shape[0] == 0:
        raise DomainError("need a nonempty (n_actions, d) feature array")
    return int(np.argmax(A @ np.asarray(theta_hat, dtype=float)))
