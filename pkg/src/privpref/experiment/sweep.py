"""Seeded simulation sweeps over estimators, sample sizes and privacy levels.

Seeding
-------
Each row of the output carries ``seed = mix(base_seed, n, repetition)``
where ``mix`` folds its arguments through splitmix64. All randomness of
that row comes from ``RngStream(seed, index)``:

* index 0 draws the true parameter,
* index 1 draws features and clear-text labels,
* ``mix(LABELS_TAG, bits(epsilon))`` randomizes labels (local model),
* ``mix(NOISE_TAG, bits(epsilon))`` draws the objective-perturbation noise.

Estimators at the same ``(n, repetition)`` therefore see the same instance
(and local estimators at the same epsilon see the same randomized labels),
so their errors can be compared pairwise. A row is reproducible from its
``(estimator, n, epsilon, seed)`` fields plus the config.
"""

import csv
import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from ..datagen import GenSpec, default_feature_bound, generate_dataset, generate_theta_star, randomize_labels
from ..exceptions import DomainError
from ..metrics import default_seminorm_lambda, l2_error, seminorm_error
from ..model import ParamSpace, empirical_covariance, pairwise_covariance
from ..privacy import PrivacyBudget, RngStream
from ..solvers import (
    OptimizerConfig,
    fit_debiased_rr,
    fit_mle_clear,
    fit_mle_rr,
    fit_objective_perturbation,
    sgd_krr,
    sgd_rr,
)

__all__ = [
    "CSV_HEADER",
    "ErrorRecord",
    "splitmix64",
    "mix_seed",
    "record_seed",
    "fit_one",
    "run_sweep",
    "write_records_csv",
    "read_records_csv",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("estimator", "n", "epsilon", "repetition", "seed", "l2_error", "seminorm_error")
_MASK = (1 << 64) - 1
THETA_STREAM = 0
DATA_STREAM = 1
LABELS_TAG = 0x6C6162656C73  # "labels"
NOISE_TAG = 0x6E6F697365  # "noise"


@dataclass(frozen=True)
class ErrorRecord:
    estimator: str
    n: int
    epsilon: float
    repetition: int
    seed: int
    l2_error: float
    seminorm_error: float

    def sort_key(self):
        return (self.estimator, self.n, self.epsilon, self.repetition)


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix_seed(*parts):
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK))
    return h


def _float_bits(x):
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def record_seed(base_seed, n, repetition):
    return mix_seed(base_seed, n, repetition)


def _space(config):
    L = config.L if config.L is not None else default_feature_bound(config.d)
    return ParamSpace(config.d, config.B, L)


def _sgd_config(config):
    return OptimizerConfig(
        step_schedule=config.step_schedule,
        step_size=config.step_size,
        gamma_override=config.gamma,
        kappa_override=config.kappa,
    )


def fit_one(config, estimator, n, epsilon, seed):
    """Regenerate one instance from ``seed`` and fit ``estimator`` on it.

    Returns ``(theta_hat, theta_star, covariance)``; ``covariance`` is the
    feature coverage matrix used for the semi-norm.
    """
    space = _space(config)
    spec = GenSpec(
        d=config.d,
        n=n,
        B=config.B,
        L=config.L,
        feature_mode=config.feature_mode,
        model=config.model,
        K=config.K,
    )
    theta_star = generate_theta_star(config.d, config.B, RngStream(seed, THETA_STREAM))
    data = generate_dataset(spec, theta_star, RngStream(seed, DATA_STREAM))
    eps_bits = _float_bits(epsilon)
    label_rng = RngStream(seed, mix_seed(LABELS_TAG, eps_bits))

    if estimator == "sgd-krr":
        rd = randomize_labels(data, epsilon, label_rng)
        res = sgd_krr(rd.features, rd.labels, config.K, epsilon, space, _sgd_config(config))
        return res.theta_hat, theta_star, pairwise_covariance(data.features)

    X = data.features
    if estimator == "mle":
        res = fit_mle_clear(X, data.labels, space)
    elif estimator == "obj-pert":
        budget = PrivacyBudget(epsilon, config.delta, config.privacy_mode)
        noise_rng = RngStream(seed, mix_seed(NOISE_TAG, eps_bits))
        res = fit_objective_perturbation(X, data.labels, space, budget, rng=noise_rng)
    else:
        y_tilde = randomize_labels(data, epsilon, label_rng).labels
        if estimator == "mle-rr":
            res = fit_mle_rr(X, y_tilde, epsilon, space)
        elif estimator == "debiased-rr":
            res = fit_debiased_rr(X, y_tilde, epsilon, space)
        elif estimator == "sgd-rr":
            link = "probit" if config.model == "thurstone" else "logistic"
            res = sgd_rr(X, y_tilde, epsilon, space, _sgd_config(config), link=link)
        else:
            raise DomainError(f"unknown estimator {estimator!r}")
    return res.theta_hat, theta_star, empirical_covariance(X)


def _run_task(args):
    config, estimator, n, epsilon, rep = args
    seed = record_seed(config.base_seed, n, rep)
    theta_hat, theta_star, cov = fit_one(config, estimator, n, epsilon, seed)
    space = _space(config)
    lam = config.seminorm_lambda
    if lam is None:
        lam = default_seminorm_lambda(epsilon, config.d, n, space.L, space.B)
        if not np.isfinite(lam):
            lam = 0.0
    return ErrorRecord(
        estimator,
        n,
        float(epsilon),
        rep,
        seed,
        l2_error(theta_hat, theta_star),
        seminorm_error(theta_hat, theta_star, cov, lam),
    )


def _tasks(config):
    for est in config.estimators:
        for n in config.n_values:
            for eps in config.epsilon_values:
                for rep in range(config.repetitions):
                    yield (config, est, n, float(eps), rep)


def run_sweep(config, workers=None, write=True):
    """Run every ``(estimator, n, epsilon, repetition)`` cell of ``config``.

    Records are sorted by ``(estimator, n, epsilon, repetition)``, so the
    output does not depend on ``workers``. Writes ``config.output_path``
    unless ``write`` is false.
    """
    workers = workers or config.workers
    if write:
        # fail before the sweep, not after it
        open(config.output_path, "a").close()
    tasks = list(_tasks(config))
    log.info("running %d fits with %d worker(s)", len(tasks), workers)
    if workers == 1:
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    records.sort(key=ErrorRecord.sort_key)
    if write:
        write_records_csv(records, config.output_path)
    return records


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else str(v)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_records_csv(path):
    """Parse a results CSV; malformed input raises ``ValueError`` naming the line."""
    types = [f.type for f in fields(ErrorRecord)]
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                vals = [t(v) for t, v in zip(types, row)]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            records.append(ErrorRecord(*vals))
    return records
