import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from privpref.exceptions import DomainError, ModeError
from privpref.model import ParamSpace, gamma_constant, pl_gamma_constant, sigmoid
from privpref.privacy import PrivacyBudget, RngStream, randomized_response
from privpref.solvers import (
    OptimizerConfig,
    OutsideGuaranteeWarning,
    default_beta,
    fit_debiased_rr,
    fit_mle_clear,
    fit_mle_rr,
    fit_objective_perturbation,
    greedy_policy_action,
    project_theta_B,
    sgd_krr,
    sgd_rr,
    sgd_step_sizes,
)

from .helpers import clipped_instance, random_feasible

SPACE = ParamSpace(5, 1.0, 1.0)

# envelope constants, calibrated once on 10-20 reference runs and frozen at 2-3x the observed ratio
C_MLE_RR = 0.02
C_SGD_RR = 0.4
C_SGD_KRR = 0.1


# projection


def test_projection_trivial_cases(rng):
    p = random_feasible(rng, 6, 2.0)
    assert np.max(np.abs(project_theta_B(p, 2.0) - p)) <= 1e-15
    assert np.allclose(project_theta_B(np.full(4, 3.7), 1.0), 0.0)
    with pytest.raises(DomainError):
        project_theta_B(p, 0.0)


def test_projection_variational_inequality(rng):
    for _ in range(20):
        d, B = int(rng.integers(2, 9)), float(rng.uniform(0.1, 3))
        v = rng.standard_normal(d) * 5 + rng.uniform(-3, 3)
        p = project_theta_B(v, B)
        for _ in range(1000):
            q = random_feasible(rng, d, B)
            assert (v - p) @ (q - p) <= 1e-9


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=12), st.floats(1e-3, 1e3))
def test_projection_lands_in_ball_and_is_idempotent(v, B):
    p = project_theta_B(np.array(v), B)
    assert abs(p.sum()) <= 1e-9 * max(1.0, np.max(np.abs(v)))
    assert np.linalg.norm(p) <= B * (1 + 1e-12)
    assert np.allclose(project_theta_B(p, B), p, atol=1e-12 * max(1.0, B))


# batch estimators


def test_mle_consistency():
    theta, data = clipped_instance(0, 10_000)
    res = fit_mle_clear(data.features, data.labels, SPACE)
    assert res.converged and SPACE.contains(res.theta_hat)
    assert np.linalg.norm(res.theta_hat - theta) <= 5 * math.sqrt(5 / 10_000) / gamma_constant(1.0, 1.0)


def test_mle_symmetric_dataset_has_no_component_along_x():
    x = np.array([1.0, -0.5, -0.5])
    res = fit_mle_clear(np.stack([x, -x]), [1, 1], ParamSpace(3))
    assert abs(res.theta_hat @ x) < 1e-8


def test_mle_separable_sample_hits_boundary():
    res = fit_mle_clear(np.array([[1.0, -1.0, 0.0]]), [1], ParamSpace(3, 2.0))
    assert np.linalg.norm(res.theta_hat) == pytest.approx(2.0, abs=1e-9)


def test_pgd_objective_monotone():
    # the batch solver only accepts Armijo steps, so tracking f along the path must not increase
    theta, data = clipped_instance(3, 500)
    seen = []

    def wrapped(t):
        from privpref.losses import nll_clear

        out = nll_clear(data.features, data.labels, t)
        seen.append(out.value)
        return out

    from privpref.solvers import projected_gradient_descent

    x, it, gn, ok = projected_gradient_descent(wrapped, np.zeros(5), 1.0, 1.0, OptimizerConfig())
    assert ok
    best = np.minimum.accumulate(seen)
    assert seen[-1] == pytest.approx(best[-1], abs=1e-9 * abs(best[-1]))


def test_mle_rr_warns_outside_regime():
    theta, data = clipped_instance(1, 300, eps=1.0)
    with pytest.warns(OutsideGuaranteeWarning):
        res = fit_mle_rr(data.features, data.labels, 1.0, SPACE)
    assert "outside_guarantee" in res.notes
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = fit_mle_rr(data.features, data.labels, 3.0, SPACE)
    assert not res.notes


def test_mle_rr_and_debiased_match_clear_at_large_epsilon():
    theta, data = clipped_instance(2, 2000, eps=50.0)
    ref = fit_mle_clear(data.features, data.labels, SPACE).theta_hat
    assert np.linalg.norm(fit_mle_rr(data.features, data.labels, 50.0, SPACE).theta_hat - ref) < 1e-4
    assert np.linalg.norm(fit_debiased_rr(data.features, data.labels, 50.0, SPACE).theta_hat - ref) < 1e-4


def test_mle_rr_envelope():
    eps, n, d, L, B = 3.0, 10_000, 5, 1.0, 1.0
    g = gamma_constant(L, B)
    env = (math.exp(eps + 2 * L * B) + 1) / (g * (math.exp(eps - 2 * L * B) - 1)) * math.sqrt((d + math.log(10)) / n)
    for seed in range(5):
        theta, data = clipped_instance(100 + seed, n, eps=eps)
        err = np.linalg.norm(fit_mle_rr(data.features, data.labels, eps, SPACE).theta_hat - theta)
        assert err <= C_MLE_RR * env


def test_mle_rr_without_signal_returns_origin():
    # at eps = 0 the randomized labels are fair coins and the noisy likelihood is flat
    errs, null = [], []
    for seed in range(50):
        theta, data = clipped_instance(200 + seed, 200, eps=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutsideGuaranteeWarning)
            est = fit_mle_rr(data.features, data.labels, 0.0, SPACE).theta_hat
        errs.append(np.linalg.norm(est - theta))
        null.append(np.linalg.norm(theta))
    assert np.allclose(errs, null, atol=1e-12)


def test_debiased_requires_positive_epsilon():
    theta, data = clipped_instance(4, 50, eps=1.0)
    with pytest.raises(DomainError):
        fit_debiased_rr(data.features, data.labels, 0.0, SPACE)


def test_debiased_monotone_in_epsilon():
    eps_grid = [0.1, 0.5, 1.0, 2.0]
    means = []
    for eps in eps_grid:
        errs = []
        for seed in range(100):
            theta, data = clipped_instance(300 + seed, 2000, eps=eps)
            errs.append(np.linalg.norm(fit_debiased_rr(data.features, data.labels, eps, SPACE).theta_hat - theta))
        means.append(np.mean(errs))
    inversions = sum(a < b for a, b in zip(means, means[1:]))
    assert inversions <= 1, means


# one-pass estimators


def test_sgd_rr_single_step_by_hand():
    x = np.array([0.4, -1.2, 0.3])
    eps, eta = 0.8, 0.37
    res = sgd_rr(x[None], [1], eps, ParamSpace(3, 10.0), OptimizerConfig(step_schedule="fixed-eta", step_size=eta))
    # from theta = 0: sigma = 1/2, so g = ((1 - 1)/(e^eps + 1) - 1/2) x = -x/2
    step = 0.5 * eta * x
    expected = step - step.mean()
    assert np.allclose(res.theta_hat, expected, atol=1e-15)


def test_sgd_rr_zero_features_stay_at_origin():
    res = sgd_rr(np.zeros((50, 4)), np.ones(50, dtype=int), 1.0, ParamSpace(4), OptimizerConfig(kappa_override=1.0))
    assert np.array_equal(res.theta_hat, np.zeros(4))


def test_step_schedules():
    cfg = OptimizerConfig()
    assert np.allclose(sgd_step_sizes(3, cfg, 0.5, 2.0, 0.25), [4.0, 2.0, 4.0 / 3])
    assert np.allclose(sgd_step_sizes(2, OptimizerConfig(step_schedule="constant"), 0.5, 2.0, 0.25), 1.0)
    assert np.allclose(sgd_step_sizes(2, OptimizerConfig(step_schedule="fixed-eta"), 0.5, 2.0, 0.25), 0.1)
    assert np.allclose(sgd_step_sizes(2, OptimizerConfig(step_size=3.0), 0.5, 2.0, 0.25), [3.0, 1.5])
    with pytest.raises(DomainError):
        sgd_step_sizes(2, cfg, 0.5, 2.0, 0.0)
    with pytest.raises(DomainError):
        OptimizerConfig(step_schedule="adam")
    with pytest.raises(DomainError):
        OptimizerConfig(gamma_override=-1.0)


def test_sgd_rr_envelope():
    eps, n, L = 1.0, 10_000, 1.0
    errs, kappas = [], []
    for seed in range(100):
        theta, data = clipped_instance(400 + seed, n, eps=eps)
        res = sgd_rr(data.features, data.labels, eps, SPACE)
        errs.append(np.linalg.norm(res.theta_hat - theta))
        kappas.append(res.notes["kappa"])
    g = gamma_constant(L, 1.0)
    env = (L / (g * np.mean(kappas))) * ((math.e + 1) / (math.e - 1)) * math.sqrt(math.log(math.log(n)) / n)
    assert np.mean(errs) <= C_SGD_RR * env


def test_sgd_rr_probit_needs_gamma():
    theta, data = clipped_instance(5, 200, model="thurstone", eps=1.0)
    with pytest.raises(DomainError):
        sgd_rr(data.features, data.labels, 1.0, SPACE, link="probit")
    res = sgd_rr(data.features, data.labels, 1.0, SPACE, OptimizerConfig(gamma_override=0.1), link="probit")
    assert SPACE.contains(res.theta_hat)


def test_sgd_krr_reduces_to_sgd_rr():
    g = np.random.default_rng(6)
    F = g.standard_normal((400, 2, 5))
    y = g.integers(0, 2, 400)
    y_rr = randomized_response(y, 0.9, RngStream(1, 1))
    from privpref.privacy import k_randomized_response

    y_krr = k_randomized_response(y, 2, 0.9, RngStream(1, 1))
    assert np.array_equal(y_rr, y_krr)
    cfg = OptimizerConfig(gamma_override=0.2, kappa_override=0.5)
    X = F[:, 1] - F[:, 0]
    for t in (1, 2, 10, 57, 400):
        a = sgd_rr(X[:t], y_rr[:t], 0.9, SPACE, cfg).theta_hat
        b = sgd_krr(F[:t], y_krr[:t], 2, 0.9, SPACE, cfg).theta_hat
        assert np.max(np.abs(a - b)) <= 1e-10


def test_sgd_krr_identical_actions_stay_at_origin():
    F = np.repeat(np.random.default_rng(0).standard_normal((30, 1, 5)), 3, axis=1)
    res = sgd_krr(F, np.zeros(30, dtype=int), 3, 1.0, SPACE, OptimizerConfig(kappa_override=1.0))
    assert np.allclose(res.theta_hat, 0.0)


def test_sgd_krr_envelope():
    eps, n, K, L = 1.0, 10_000, 4, 1.0
    errs, kappas = [], []
    for seed in range(20):
        theta, data = clipped_instance(500 + seed, n, model="plackett-luce", K=K, eps=eps)
        res = sgd_krr(data.features, data.labels, K, eps, SPACE)
        errs.append(np.linalg.norm(res.theta_hat - theta))
        kappas.append(res.notes["kappa"])
    g = pl_gamma_constant(L, 1.0)
    factor = (math.e + K - 1) / (math.e - 1)
    env = (L / (g * np.mean(kappas))) * factor * math.sqrt(math.log(math.log(n)) / n)
    assert np.mean(errs) <= C_SGD_KRR * env


def test_sgd_krr_rejects_bad_labels():
    F = np.zeros((3, 3, 5))
    with pytest.raises(DomainError):
        sgd_krr(F, [0, 1, 3], 3, 1.0, SPACE)
    with pytest.raises(DomainError):
        sgd_krr(F, [0, 1, 2], 4, 1.0, SPACE)


# objective perturbation


def test_objective_perturbation_degenerate_matches_mle():
    theta, data = clipped_instance(7, 3000)
    b = PrivacyBudget(1.0, 1e-3, "central-label")
    ref = fit_mle_clear(data.features, data.labels, SPACE).theta_hat
    res = fit_objective_perturbation(data.features, data.labels, SPACE, b, beta=0.0, sigma=0.0, rng=0)
    assert np.linalg.norm(res.theta_hat - ref) <= 1e-6
    assert res.notes["approximate_minimizer"]


def test_objective_perturbation_modes():
    theta, data = clipped_instance(8, 100)
    with pytest.raises(ModeError):
        fit_objective_perturbation(data.features, data.labels, SPACE, PrivacyBudget(1.0), rng=0)
    std = PrivacyBudget(0.01, 1e-3, "central-standard")
    assert default_beta(100, SPACE, std) == pytest.approx(400.0)
    assert default_beta(100, SPACE, PrivacyBudget(0.01, 1e-3, "central-label")) == pytest.approx(10.0)
    with pytest.warns(OutsideGuaranteeWarning):
        fit_objective_perturbation(data.features, data.labels, SPACE, std, beta=1.0, rng=0)
    res = fit_objective_perturbation(data.features, data.labels, SPACE, std, rng=RngStream(1))
    assert res.budget_spent == std and SPACE.contains(res.theta_hat)


def test_objective_perturbation_seeded():
    theta, data = clipped_instance(9, 500)
    b = PrivacyBudget(0.5, 1e-3, "central-label")
    a = fit_objective_perturbation(data.features, data.labels, SPACE, b, rng=RngStream(3, 9))
    c = fit_objective_perturbation(data.features, data.labels, SPACE, b, rng=RngStream(3, 9))
    assert np.array_equal(a.theta_hat, c.theta_hat)


# every estimator stays in the parameter space


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 3.0), st.floats(0.2, 3.0))
def test_outputs_in_parameter_space(seed, eps, B):
    g = np.random.default_rng(seed)
    n, d = int(g.integers(1, 40)), int(g.integers(2, 6))
    X = g.standard_normal((n, d)) * 3
    y = g.integers(0, 2, n)
    sp = ParamSpace(d, B, 1.0)
    budget = PrivacyBudget(eps, 1e-3, "central-label")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideGuaranteeWarning)
        outs = [
            fit_mle_clear(X, y, sp),
            fit_mle_rr(X, y, eps, sp),
            fit_debiased_rr(X, y, eps, sp),
            sgd_rr(X, y, eps, sp),
            fit_objective_perturbation(X, y, sp, budget, rng=seed),
            sgd_krr(g.standard_normal((n, 3, d)), g.integers(0, 3, n), 3, eps, sp),
        ]
    for r in outs:
        assert sp.contains(r.theta_hat)


# greedy policy


def test_greedy_policy(rng):
    A = rng.standard_normal((3, 2))
    assert greedy_policy_action(np.zeros(2), A) == 0
    for _ in range(50):
        th = rng.standard_normal(2)
        scores = [a[0] * th[0] + a[1] * th[1] for a in A]
        best = max(range(3), key=lambda i: (scores[i], -i))
        assert greedy_policy_action(th, A) == best
        assert greedy_policy_action(th * rng.uniform(0.01, 100), A) == best
    with pytest.raises(DomainError):
        greedy_policy_action(np.zeros(2), np.empty((0, 2)))
