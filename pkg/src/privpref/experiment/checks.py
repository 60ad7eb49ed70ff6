"""Self-checks for the randomizers and the gradient algebra."""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chisquare

from .. import losses
from ..model import sigmoid
from ..privacy import (
    as_generator,
    k_randomized_response,
    krr_keep_probability,
    randomized_response,
    rr_keep_probability,
)

__all__ = ["PrivacyReport", "GradcheckReport", "check_privacy", "gradcheck", "finite_difference_gradient"]

Z_LIMIT = 4.0
CHI2_ALPHA = 1e-3
FD_TOL = 1e-5
IDENTITY_TOL = 1e-10


@dataclass
class PrivacyReport:
    epsilon: float
    trials: int
    expected_keep: float
    keep_rate: float
    z: float
    krr_K: int
    krr_pvalue: float

    @property
    def passed(self):
        return abs(self.z) <= Z_LIMIT and self.krr_pvalue >= CHI2_ALPHA

    def lines(self):
        return [
            f"RR   eps={self.epsilon:g} trials={self.trials} keep_rate={self.keep_rate:.5f} "
            f"expected={self.expected_keep:.5f} z={self.z:+.3f}",
            f"K-RR K={self.krr_K} chi-square p-value={self.krr_pvalue:.4g}",
            "PASS" if self.passed else "FAIL",
        ]


def _keep_z(kept, trials, p):
    rate = kept / trials
    var = p * (1.0 - p) / trials
    if var == 0.0:
        return rate, 0.0 if rate == p else np.inf
    return rate, (rate - p) / np.sqrt(var)


def check_privacy(epsilon, trials, rng, randomizer=randomized_response, k_randomizer=k_randomized_response, K=4):
    """Compare empirical randomizer output frequencies with their design values.

    RR passes when the keep-rate z-score is within 4; the K-RR check is a
    chi-square test on the offset ``(y_out - y_in) mod K`` at level 1e-3.
    """
    if trials < 10_000:
        raise ValueError("check_privacy needs at least 10^4 trials")
    gen = as_generator(rng)
    y = gen.integers(0, 2, size=trials)
    out = np.asarray(randomizer(y, epsilon, gen))
    p = rr_keep_probability(epsilon)
    rate, z = _keep_z(int(np.sum(out == y)), trials, p)

    yk = gen.integers(0, K, size=trials)
    outk = np.asarray(k_randomizer(yk, K, epsilon, gen))
    offsets = np.bincount((outk - yk) % K, minlength=K)
    pk = krr_keep_probability(epsilon, K)
    expected = np.full(K, (1.0 - pk) / (K - 1))
    expected[0] = pk
    expected *= trials
    if np.any(expected == 0):
        # degenerate design (keep with probability one): any mass off the support fails
        pval = 1.0 if np.all(offsets[expected == 0] == 0) else 0.0
    else:
        pval = float(chisquare(offsets, expected).pvalue)
    return PrivacyReport(float(epsilon), trials, float(p), float(rate), float(z), K, pval)


@dataclass
class GradcheckReport:
    cases: int
    max_fd_error: dict = field(default_factory=dict)
    max_identity_error: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v < FD_TOL for v in self.max_fd_error.values()) and all(
            v < IDENTITY_TOL for v in self.max_identity_error.values()
        )

    def lines(self):
        out = [f"{k:<18} max relative FD error {v:.3e} (< {FD_TOL:g})" for k, v in self.max_fd_error.items()]
        out += [
            f"{k:<18} max identity error {v:.3e} (< {IDENTITY_TOL:g})" for k, v in self.max_identity_error.items()
        ]
        out.append("PASS" if self.passed else "FAIL")
        return out


def finite_difference_gradient(f, theta, h=1e-6):
    """Central differences of a scalar function, one coordinate at a time."""
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def gradcheck(seed=0, cases=100, funcs=None):
    """Finite-difference and exhaustive-expectation checks on random instances.

    ``funcs`` may replace any of ``nll_clear``, ``nll_rr``,
    ``debiased_rr_loss``, ``sgd_rr_gradient`` and ``sgd_krr_gradient`` (used
    to confirm the checks catch broken gradients).
    """
    if cases < 1:
        raise ValueError("cases must be >= 1")
    fn = {
        "nll_clear": losses.nll_clear,
        "nll_rr": losses.nll_rr,
        "debiased_rr_loss": losses.debiased_rr_loss,
        "sgd_rr_gradient": losses.sgd_rr_gradient,
        "sgd_krr_gradient": losses.sgd_krr_gradient,
    }
    fn.update(funcs or {})
    gen = np.random.default_rng(seed)
    report = GradcheckReport(cases)
    fd = dict.fromkeys(("nll_clear", "nll_rr", "debiased_rr_loss"), 0.0)
    ident = dict.fromkeys(("sgd_rr_gradient", "sgd_krr_gradient"), 0.0)
    for _ in range(cases):
        d = int(gen.integers(2, 11))
        n = int(gen.integers(1, 21))
        X = gen.standard_normal((n, d))
        y = gen.integers(0, 2, size=n)
        theta = gen.standard_normal(d)
        theta -= theta.mean()
        theta *= gen.uniform(0.1, 1.0) / np.linalg.norm(theta)
        eps = float(gen.uniform(0.05, 3.0))

        cases_fd = {
            "nll_clear": lambda t: fn["nll_clear"](X, y, t),
            "nll_rr": lambda t: fn["nll_rr"](X, y, t, eps),
            "debiased_rr_loss": lambda t: fn["debiased_rr_loss"](X, y, t, eps),
        }
        for name, f in cases_fd.items():
            approx = finite_difference_gradient(lambda t: f(t).value, theta)
            fd[name] = max(fd[name], _rel(f(theta).gradient, approx))

        # binary: E over RR of the stochastic gradient equals (2 s - 1)(sigma(z) - y) x
        x, yt = X[0], int(y[0])
        keep = rr_keep_probability(eps)
        expect = keep * fn["sgd_rr_gradient"](x, yt, theta, eps) + (1 - keep) * fn["sgd_rr_gradient"](
            x, 1 - yt, theta, eps
        )
        s = sigmoid(float(x @ theta))
        target = (2 * keep - 1) * (s - yt) * x
        ident["sgd_rr_gradient"] = max(ident["sgd_rr_gradient"], _rel_floor(expect, target))

        # K-wise: E over K-RR equals -((e^eps - 1)/(e^eps + K - 1)) grad log p_y
        K = int(gen.integers(2, 7))
        F = gen.standard_normal((K, d))
        yk = int(gen.integers(0, K))
        pk = krr_keep_probability(eps, K)
        q = (1.0 - pk) / (K - 1)
        expect = sum((pk if j == yk else q) * fn["sgd_krr_gradient"](F, j, theta, eps, K) for j in range(K))
        scale = (np.exp(eps) - 1.0) / (np.exp(eps) + K - 1.0)
        target = -scale * losses.krr_gradient_log_probs(F, theta)[yk]
        ident["sgd_krr_gradient"] = max(ident["sgd_krr_gradient"], _rel_floor(expect, target))
    report.max_fd_error = fd
    report.max_identity_error = ident
    return report


def _rel_floor(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1.0))
