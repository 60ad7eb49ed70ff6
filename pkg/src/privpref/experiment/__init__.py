"""Simulation sweeps, plots and self-checks behind the ``privpref`` command."""

from .checks import check_privacy, gradcheck
from .config import ExperimentConfig, load_config, parse_config
from .plot import emit_svg
from .sweep import ErrorRecord, read_records_csv, run_sweep, write_records_csv

__all__ = [
    "check_privacy",
    "gradcheck",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "emit_svg",
    "ErrorRecord",
    "read_records_csv",
    "run_sweep",
    "write_records_csv",
]
