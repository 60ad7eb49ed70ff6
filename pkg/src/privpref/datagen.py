"""Synthetic preference data: Gaussian action features, model-drawn labels."""

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import chi

from .exceptions import DomainError
from .model import btl_label_prob, pl_label_probs, thurstone_label_prob
from .privacy import as_generator, k_randomized_response, randomized_response

__all__ = [
    "FEATURE_MODES",
    "MODELS",
    "GenSpec",
    "PreferenceDataset",
    "default_feature_bound",
    "generate_theta_star",
    "generate_dataset",
    "randomize_labels",
    "write_dataset_csv",
    "read_dataset_csv",
]

FEATURE_MODES = ("gaussian-unbounded", "gaussian-clipped")
MODELS = ("btl", "thurstone", "plackett-luce")


def default_feature_bound(d, quantile=0.99):
    """Quantile of the norm of a standard Gaussian vector in ``R^d``.

    Used as the nominal feature bound ``L`` when features are not clipped.
    It is reported, not enforced.
    """
    return float(chi.ppf(quantile, d))


@dataclass(frozen=True)
class GenSpec:
    d: int
    n: int
    B: float = 1.0
    L: Optional[float] = None
    feature_mode: str = "gaussian-unbounded"
    model: str = "btl"
    K: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("d must be >= 2")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.feature_mode not in FEATURE_MODES:
            raise DomainError(f"unknown feature mode {self.feature_mode!r}")
        if self.model not in MODELS:
            raise DomainError(f"unknown model {self.model!r}")
        if self.model == "plackett-luce" and self.K < 2:
            raise DomainError("Plackett-Luce data needs K >= 2")
        if self.feature_mode == "gaussian-clipped" and not (self.L and self.L > 0):
            raise DomainError("clipped features need a positive L")

    @property
    def feature_bound(self):
        return self.L if self.L is not None else default_feature_bound(self.d)

    @property
    def n_actions(self):
        return self.K if self.model == "plackett-luce" else 2


@dataclass
class PreferenceDataset:
    """Features with labels, optionally privatized.

    Pairwise data holds ``features`` of shape ``(n, d)`` (differential
    features) and labels in ``{0, 1}``. K-wise data holds ``(n, K, d)`` action
    features and labels in ``{0, .., K-1}``. ``epsilon`` is ``None`` for
    clear-text labels.
    """

    features: np.ndarray
    labels: np.ndarray
    epsilon: Optional[float] = None

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def K(self):
        return 2 if self.features.ndim == 2 else self.features.shape[1]

    @property
    def is_kwise(self):
        return self.features.ndim == 3


def generate_theta_star(d, B, rng):
    """Random direction on the centered sphere of radius ``B``."""
    if d < 2:
        raise DomainError("d must be >= 2")
    gen = as_generator(rng)
    while True:
        v = gen.standard_normal(d)
        v -= v.mean()
        norm = np.linalg.norm(v)
        if norm > 0:
            return v * (B / norm)


def _clip_rows(A, L):
    norms = np.linalg.norm(A, axis=-1, keepdims=True)
    return A * np.minimum(1.0, L / np.maximum(norms, np.finfo(float).tiny))


def generate_dataset(spec, theta_star, rng):
    """Draw ``spec.n`` samples under ``spec.model`` with true parameter ``theta_star``."""
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (spec.d,):
        raise DomainError(f"theta_star must have length {spec.d}")
    gen = as_generator(rng)
    phi = gen.standard_normal((spec.n, spec.n_actions, spec.d))
    if spec.feature_mode == "gaussian-clipped":
        phi = _clip_rows(phi, spec.L)
    u = gen.random(spec.n)
    if spec.model == "plackett-luce":
        p = pl_label_probs(phi, theta_star)
        y = (u[:, None] >= np.cumsum(p, axis=1)).sum(axis=1)
        return PreferenceDataset(phi, np.minimum(y, spec.K - 1).astype(np.int64))
    x = phi[:, 1] - phi[:, 0]
    if spec.model == "btl":
        p1 = btl_label_prob(x, theta_star)
    else:
        p1 = thurstone_label_prob(x, theta_star)
    return PreferenceDataset(x, (u < p1).astype(np.int64))


def randomize_labels(data, epsilon, rng):
    """Privatize every label independently with RR (pairwise) or K-RR (K-wise).

    Features are shared with the input, not copied or modified.
    """
    if data.is_kwise:
        y = k_randomized_response(data.labels, data.K, epsilon, rng)
    else:
        y = randomized_response(data.labels, epsilon, rng)
    return replace(data, labels=np.asarray(y, dtype=np.int64), epsilon=epsilon)


def write_dataset_csv(data, path):
    """Write a dataset to CSV; reals use 17 significant digits (exact round trip)."""
    F = data.features
    if data.is_kwise:
        n, K, d = F.shape
        header = [f"a{k}_x{j}" for k in range(K) for j in range(d)]
        rows = F.reshape(n, K * d)
    else:
        header = [f"x{j}" for j in range(F.shape[1])]
        rows = F
    header.append("y")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if data.epsilon is not None:
            fh.write(f"# epsilon={data.epsilon!r}\n")
        w.writerow(header)
        for r, lab in zip(rows, data.labels):
            w.writerow([format(v, ".17g") for v in r] + [int(lab)])


def read_dataset_csv(path):
    """Inverse of :func:`write_dataset_csv`."""
    epsilon = None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith("#"):
        epsilon = float(lines[0].split("=", 1)[1])
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader)
    body = [row for row in reader if row]
    if not body:
        raise DomainError(f"{path}: no data rows")
    vals = np.array([[float(v) for v in row[:-1]] for row in body])
    labels = np.array([int(row[-1]) for row in body], dtype=np.int64)
    if header[0].startswith("a"):
        K = 1 + max(int(h.split("_")[0][1:]) for h in header[:-1])
        vals = vals.reshape(len(body), K, -1)
    return PreferenceDataset(vals, labels, epsilon)
