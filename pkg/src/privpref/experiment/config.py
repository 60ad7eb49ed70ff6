"""Flat ``key = value`` experiment configuration files.

One assignment per line, ``#`` starts a comment, lists are comma-separated::

    d = 5
    n_values = 1000, 2154, 4642, 10000
    epsilon_values = 0.1, 0.5, 1
    estimators = mle, obj-pert, sgd-rr
"""

from dataclasses import dataclass, field, fields
from typing import Optional

from ..exceptions import ConfigError
from ..solvers import SCHEDULES

__all__ = ["ESTIMATORS", "ExperimentConfig", "parse_config", "load_config"]

ESTIMATORS = ("mle", "mle-rr", "debiased-rr", "sgd-rr", "sgd-krr", "obj-pert")
PAIRWISE_ESTIMATORS = ("mle", "mle-rr", "debiased-rr", "sgd-rr", "obj-pert")


@dataclass
class ExperimentConfig:
    d: int = 5
    n_values: list = field(default_factory=lambda: [1000, 2154, 4642, 10000])
    epsilon_values: list = field(default_factory=lambda: [0.1, 0.5, 1.0])
    delta: float = 1e-3
    estimators: list = field(default_factory=lambda: ["mle", "obj-pert", "sgd-rr"])
    repetitions: int = 100
    base_seed: int = 0
    model: str = "btl"
    K: int = 2
    B: float = 1.0
    L: Optional[float] = None
    feature_mode: str = "gaussian-unbounded"
    privacy_mode: str = "central-label"
    step_schedule: str = "inverse-t"
    step_size: Optional[float] = None
    gamma: Optional[float] = None
    kappa: Optional[float] = None
    seminorm_lambda: Optional[float] = None
    workers: int = 1
    output_path: str = "results.csv"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.d < 2:
            raise ConfigError("d must be >= 2", "d")
        for key in ("n_values", "epsilon_values", "estimators"):
            if not getattr(self, key):
                raise ConfigError(f"{key} must be a nonempty list", key)
        if any(n < 1 for n in self.n_values):
            raise ConfigError("sample sizes must be positive", "n_values")
        if any(e < 0 for e in self.epsilon_values):
            raise ConfigError("epsilons must be nonnegative", "epsilon_values")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1", "repetitions")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer", "base_seed")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; expected some of {ESTIMATORS}", "estimators")
        if "obj-pert" in self.estimators and not 0 < self.delta < 1:
            raise ConfigError("obj-pert needs delta in (0, 1)", "delta")
        if self.model not in ("btl", "thurstone", "plackett-luce"):
            raise ConfigError(f"unknown model {self.model!r}", "model")
        if self.model == "plackett-luce":
            if self.K < 2:
                raise ConfigError("plackett-luce needs K >= 2", "K")
            if set(self.estimators) != {"sgd-krr"}:
                raise ConfigError("K-wise data supports only the sgd-krr estimator", "estimators")
        elif "sgd-krr" in self.estimators:
            raise ConfigError("sgd-krr needs model = plackett-luce", "estimators")
        if self.model == "thurstone" and set(self.estimators) != {"sgd-rr"}:
            raise ConfigError("Thurstone data supports only the sgd-rr estimator", "estimators")
        if self.model == "thurstone" and self.gamma is None and self.step_size is None:
            raise ConfigError("Thurstone runs need gamma (no closed-form curvature constant)", "gamma")
        if self.privacy_mode not in ("central-label", "central-standard"):
            raise ConfigError("privacy_mode must be central-label or central-standard", "privacy_mode")
        if self.feature_mode not in ("gaussian-unbounded", "gaussian-clipped"):
            raise ConfigError(f"unknown feature mode {self.feature_mode!r}", "feature_mode")
        if self.feature_mode == "gaussian-clipped" and self.L is None:
            raise ConfigError("gaussian-clipped features need L", "L")
        if self.step_schedule not in SCHEDULES:
            raise ConfigError(f"step_schedule must be one of {SCHEDULES}", "step_schedule")
        for key in ("B", "L", "step_size", "gamma", "kappa"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise ConfigError(f"{key} must be positive", key)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", "workers")


def _int(v):
    return int(v, 0) if v.lower().startswith("0x") else int(v)


def _opt_float(v):
    return None if v.lower() in ("", "none", "auto") else float(v)


def _list(conv):
    return lambda v: [conv(x.strip()) for x in v.split(",") if x.strip()]


_PARSERS = {
    "d": _int,
    "n_values": _list(_int),
    "epsilon_values": _list(float),
    "delta": float,
    "estimators": _list(str),
    "repetitions": _int,
    "base_seed": _int,
    "model": str,
    "K": _int,
    "B": float,
    "L": _opt_float,
    "feature_mode": str,
    "privacy_mode": str,
    "step_schedule": str,
    "step_size": _opt_float,
    "gamma": _opt_float,
    "kappa": _opt_float,
    "seminorm_lambda": _opt_float,
    "workers": _int,
    "output_path": str,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text):
    """Build an :class:`ExperimentConfig` from config-file text."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}", key) from None
    return ExperimentConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
