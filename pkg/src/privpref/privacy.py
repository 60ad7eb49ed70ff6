"""Label randomizers for the local model and Gaussian noise for the central model.

Randomness is never drawn from a global generator. Every function takes an
``rng`` that is either a ``numpy.random.Generator`` or an :class:`RngStream`
(a ``(seed, stream_index)`` pair that deterministically names a generator).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ModeError
from .model import sigmoid

__all__ = [
    "LOCAL_LABEL",
    "CENTRAL_LABEL",
    "CENTRAL_STANDARD",
    "PrivacyBudget",
    "RngStream",
    "as_generator",
    "rr_keep_probability",
    "krr_keep_probability",
    "randomized_response",
    "k_randomized_response",
    "central_noise_sigma",
    "standard_dp_beta_floor",
    "sample_gaussian_vector",
]

LOCAL_LABEL = "local-label"
CENTRAL_LABEL = "central-label"
CENTRAL_STANDARD = "central-standard"
_MODES = (LOCAL_LABEL, CENTRAL_LABEL, CENTRAL_STANDARD)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0
    mode: str = LOCAL_LABEL

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ModeError(f"unknown privacy mode {self.mode!r}; expected one of {_MODES}")
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta!r}")
        if self.mode == LOCAL_LABEL and self.delta != 0:
            raise DomainError("randomized response is pure-epsilon; local-label mode needs delta = 0")

    @property
    def is_central(self):
        return self.mode != LOCAL_LABEL


@dataclass(frozen=True)
class RngStream:
    """Names an independent random stream: ``seed`` plus a consumer index.

    Two streams with the same seed but different ``stream_index`` are
    statistically independent (``SeedSequence`` spawn keys), so adding or
    reordering consumers never perturbs the draws of the others.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise DomainError("stream_index must be nonnegative")

    def generator(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    """Return a ``numpy.random.Generator`` for ``rng``.

    Accepts a Generator (returned as is), an :class:`RngStream`, an integer
    seed, or ``None`` for fresh OS entropy.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def _check_epsilon(epsilon):
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon!r}")


def rr_keep_probability(epsilon):
    """Probability ``e^eps / (1 + e^eps)`` that randomized response keeps a label."""
    _check_epsilon(epsilon)
    return sigmoid(epsilon)


def krr_keep_probability(epsilon, K):
    """Probability ``e^eps / (e^eps + K - 1)`` that K-RR keeps a label."""
    _check_epsilon(epsilon)
    if K < 2:
        raise DomainError("K-RR needs K >= 2")
    if np.isinf(epsilon):
        return 1.0
    return float(1.0 / (1.0 + (K - 1) * np.exp(-epsilon)))


def randomized_response(y, epsilon, rng):
    """Binary randomized response on labels in ``{0, 1}``.

    Each label is kept with probability ``sigmoid(epsilon)`` and flipped
    otherwise. ``y`` may be a scalar or an array; the output has its shape.
    """
    keep_p = rr_keep_probability(epsilon)
    y_arr = np.asarray(y)
    if not np.all((y_arr == 0) | (y_arr == 1)):
        raise DomainError("binary labels must be 0 or 1")
    gen = as_generator(rng)
    keep = gen.random(y_arr.shape) < keep_p
    out = np.where(keep, y_arr, 1 - y_arr).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def k_randomized_response(y, K, epsilon, rng):
    """K-ary randomized response on labels in ``{0, ..., K-1}``.

    Keeps the label with probability ``e^eps / (e^eps + K - 1)``; otherwise
    reports one of the other ``K - 1`` labels uniformly.
    """
    keep_p = krr_keep_probability(epsilon, K)
    y_arr = np.asarray(y)
    if not np.all((y_arr >= 0) & (y_arr < K) & (y_arr == np.round(y_arr))):
        raise DomainError(f"labels must be integers in [0, {K})")
    y_arr = y_arr.astype(np.int64)
    gen = as_generator(rng)
    keep = gen.random(y_arr.shape) < keep_p
    shift = gen.integers(1, K, size=y_arr.shape)
    out = np.where(keep, y_arr, (y_arr + shift) % K)
    return int(out) if out.ndim == 0 else out


def central_noise_sigma(L, budget):
    """Standard deviation of the objective-perturbation noise vector.

    central-label: ``L sqrt(8 ln(2/delta) + 4 eps) / eps``.
    central-standard: ``4 L sqrt(8 ln(4/delta) + 2 eps) / eps``.
    """
    if not budget.is_central:
        raise ModeError("Gaussian noise calibration needs a central privacy mode")
    eps, delta = budget.epsilon, budget.delta
    if not eps > 0:
        raise DomainError("central mechanisms need epsilon > 0")
    if not 0 < delta < 1:
        raise DomainError("central mechanisms need delta in (0, 1)")
    if budget.mode == CENTRAL_LABEL:
        return L * np.sqrt(8.0 * np.log(2.0 / delta) + 4.0 * eps) / eps
    return 4.0 * L * np.sqrt(8.0 * np.log(4.0 / delta) + 2.0 * eps) / eps


def standard_dp_beta_floor(L, epsilon):
    """Smallest regularizer ``4 L^2 / eps`` allowed under standard (feature+label) DP."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return 4.0 * L * L / epsilon


def sample_gaussian_vector(d, sigma, rng):
    """``d`` iid draws from ``N(0, sigma^2)``."""
    if d < 1:
        raise DomainError("d must be >= 1")
    if not sigma >= 0:
        raise DomainError("sigma must be nonnegative")
    z = as_generator(rng).standard_normal(d)
    return z * sigma if sigma > 0 else np.zeros(d)
