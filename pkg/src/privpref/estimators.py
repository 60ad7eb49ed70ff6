"""scikit-learn compatible reward-parameter estimators.

Every estimator fits a reward vector ``coef_`` in the centered ball of
radius ``B`` from preference data. Pairwise estimators take ``X`` of shape
``(n, d)`` holding differential features ``phi(s, a1) - phi(s, a0)`` and
labels in ``{0, 1}`` (1 means ``a1`` was preferred). The local-model
estimators expect labels that were already privatized with
:func:`privpref.privacy.randomized_response` at the given ``epsilon``.

>>> est = SGDRR(epsilon=1.0, gamma=0.1).fit(X, y_tilde)  # doctest: +SKIP
>>> est.coef_, est.predict_proba(X_new)  # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import ParamSpace, pl_label_probs, sigmoid
from .privacy import CENTRAL_LABEL, CENTRAL_STANDARD, PrivacyBudget
from .solvers import (
    OptimizerConfig,
    fit_debiased_rr,
    fit_mle_clear,
    fit_mle_rr,
    fit_objective_perturbation,
    sgd_krr,
    sgd_rr,
)

__all__ = [
    "ClearTextMLE",
    "RandomizedResponseMLE",
    "DebiasedRR",
    "SGDRR",
    "SGDKRR",
    "ObjectivePerturbation",
]


class _PairwiseRewardModel(BaseEstimator):
    """Shared validation, prediction and scoring for pairwise estimators."""

    def _space(self, X):
        L = self.L
        if L is None:
            # features are not protected under label DP, so reading the bound off them is fine
            L = max(float(np.max(np.linalg.norm(X, axis=1))) / 2.0, 1e-12)
        return ParamSpace(X.shape[1], self.B, L)

    def _optimizer(self):
        return OptimizerConfig(max_iterations=self.max_iter, gradient_tolerance=self.tol)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        y = y.astype(np.int64)
        space = self._space(X)
        result = self._fit(X, y, space)
        self.coef_ = result.theta_hat
        self.n_iter_ = result.iterations_used
        self.result_ = result
        self.space_ = space
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return X @ self.coef_

    def predict_proba(self, X):
        """Columns are ``P[y = 0]`` and ``P[y = 1]`` under the BTL model."""
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)

    def score(self, X, y):
        """Mean log-likelihood of clear-text labels ``y``."""
        z = self.decision_function(X)
        y = np.asarray(y, dtype=float)
        return float(np.mean(-np.logaddexp(0.0, -z) * y - np.logaddexp(0.0, z) * (1 - y)))


class ClearTextMLE(_PairwiseRewardModel):
    """Non-private maximum-likelihood estimate of the BTL reward parameter."""

    def __init__(self, B=1.0, L=None, max_iter=100_000, tol=1e-8):
        self.B = B
        self.L = L
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, X, y, space):
        return fit_mle_clear(X, y, space, self._optimizer())


class RandomizedResponseMLE(_PairwiseRewardModel):
    """Likelihood maximiser for labels passed through randomized response.

    Only guaranteed to be accurate when ``epsilon > 2 L B``.
    """

    def __init__(self, epsilon=1.0, B=1.0, L=None, max_iter=100_000, tol=1e-8):
        self.epsilon = epsilon
        self.B = B
        self.L = L
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, X, y, space):
        return fit_mle_rr(X, y, self.epsilon, space, self._optimizer())


class DebiasedRR(_PairwiseRewardModel):
    """Minimiser of the de-biased loss for randomized-response labels."""

    def __init__(self, epsilon=1.0, B=1.0, L=None, max_iter=100_000, tol=1e-8):
        self.epsilon = epsilon
        self.B = B
        self.L = L
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, X, y, space):
        return fit_debiased_rr(X, y, self.epsilon, space, self._optimizer())


class SGDRR(_PairwiseRewardModel):
    """One-pass projected SGD on randomized-response labels.

    Parameters
    ----------
    epsilon : float
        Budget the labels were randomized with.
    step_schedule : {"inverse-t", "constant", "fixed-eta"}
        See :class:`privpref.solvers.OptimizerConfig`.
    gamma, kappa : float, optional
        Curvature and coverage constants for the step size. By default
        ``gamma`` is the worst-case sigmoid slope over the ball, which is
        very conservative for unbounded features, and ``kappa`` is the
        smallest eigenvalue of the feature covariance.
    link : {"logistic", "probit"}
        ``probit`` fits Thurstone feedback and needs ``gamma``.
    """

    def __init__(
        self,
        epsilon=1.0,
        B=1.0,
        L=None,
        step_schedule="inverse-t",
        step_size=None,
        gamma=None,
        kappa=None,
        link="logistic",
    ):
        self.epsilon = epsilon
        self.B = B
        self.L = L
        self.step_schedule = step_schedule
        self.step_size = step_size
        self.gamma = gamma
        self.kappa = kappa
        self.link = link

    def _fit(self, X, y, space):
        cfg = OptimizerConfig(
            step_schedule=self.step_schedule,
            step_size=self.step_size,
            gamma_override=self.gamma,
            kappa_override=self.kappa,
        )
        return sgd_rr(X, y, self.epsilon, space, cfg, link=self.link)


class ObjectivePerturbation(_PairwiseRewardModel):
    """Central label-DP estimator: Gaussian linear noise added to the objective.

    ``beta`` defaults to ``sqrt(n) / B`` (raised to ``4 L^2 / epsilon`` when
    ``privacy_mode="central-standard"``). The guarantee is for the exact
    minimiser; the solver returns a close approximation.
    """

    def __init__(
        self,
        epsilon=1.0,
        delta=1e-3,
        privacy_mode=CENTRAL_LABEL,
        beta=None,
        B=1.0,
        L=None,
        random_state=None,
        max_iter=100_000,
        tol=1e-8,
    ):
        self.epsilon = epsilon
        self.delta = delta
        self.privacy_mode = privacy_mode
        self.beta = beta
        self.B = B
        self.L = L
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol

    def _space(self, X):
        if self.privacy_mode == CENTRAL_STANDARD and self.L is None:
            raise ValueError("standard DP protects features too; pass the feature bound L")
        return super()._space(X)

    def _fit(self, X, y, space):
        budget = PrivacyBudget(self.epsilon, self.delta, self.privacy_mode)
        return fit_objective_perturbation(
            X, y, space, budget, beta=self.beta, rng=self.random_state, cfg=self._optimizer()
        )


class SGDKRR(BaseEstimator):
    """One-pass projected SGD on K-wise top-choice labels privatized by K-RR.

    ``fit`` takes action features of shape ``(n, K, d)`` and labels in
    ``{0, .., K-1}``.
    """

    def __init__(self, epsilon=1.0, B=1.0, L=None, step_schedule="inverse-t", step_size=None, gamma=None, kappa=None):
        self.epsilon = epsilon
        self.B = B
        self.L = L
        self.step_schedule = step_schedule
        self.step_size = step_size
        self.gamma = gamma
        self.kappa = kappa

    def fit(self, X, y):
        F = check_array(X, dtype=float, allow_nd=True, ensure_2d=False)
        if F.ndim != 3:
            raise ValueError("expected action features of shape (n, K, d)")
        y = np.asarray(y)
        K = F.shape[1]
        L = self.L if self.L is not None else max(float(np.max(np.linalg.norm(F, axis=2))), 1e-12)
        space = ParamSpace(F.shape[2], self.B, L)
        cfg = OptimizerConfig(
            step_schedule=self.step_schedule,
            step_size=self.step_size,
            gamma_override=self.gamma,
            kappa_override=self.kappa,
        )
        result = sgd_krr(F, y, K, self.epsilon, space, cfg)
        self.coef_ = result.theta_hat
        self.n_iter_ = result.iterations_used
        self.result_ = result
        self.space_ = space
        self.n_features_in_ = F.shape[2]
        return self

    def predict_proba(self, X):
        check_is_fitted(self)
        return pl_label_probs(np.asarray(X, dtype=float), self.coef_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=-1)
