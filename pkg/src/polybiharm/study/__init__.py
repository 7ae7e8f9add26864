"""Manufactured-solution convergence studies, acceptance checks and the ``study`` command."""

from .cases import ManufacturedCase, PolynomialFunction, manufactured_case
from .harness import StudyConfig, evaluate_gates, load_config, parse_config, run_study, write_reports
from .metrics import ErrorReport, compute_eoc, compute_errors

__all__ = [
    "ManufacturedCase",
    "PolynomialFunction",
    "manufactured_case",
    "StudyConfig",
    "parse_config",
    "load_config",
    "run_study",
    "evaluate_gates",
    "write_reports",
    "ErrorReport",
    "compute_errors",
    "compute_eoc",
]
