"""Reward-parameter estimation from pairwise and K-wise preferences under label differential privacy."""

from .estimators import (
    ClearTextMLE,
    DebiasedRR,
    ObjectivePerturbation,
    RandomizedResponseMLE,
    SGDKRR,
    SGDRR,
)
from .exceptions import ConfigError, DomainError, ModeError
from .model import ParamSpace
from .privacy import PrivacyBudget, RngStream
from .solvers import EstimatorResult, OptimizerConfig

__version__ = "0.1.0"

__all__ = [
    "ClearTextMLE",
    "DebiasedRR",
    "ObjectivePerturbation",
    "RandomizedResponseMLE",
    "SGDKRR",
    "SGDRR",
    "ConfigError",
    "DomainError",
    "ModeError",
    "ParamSpace",
    "PrivacyBudget",
    "RngStream",
    "EstimatorResult",
    "OptimizerConfig",
]
