"""Experiment engine, statistics and command-line interface."""

from .config import ExperimentConfig, arithmetic_config, berry_config, read_config_file
from .experiments import (ExperimentResult, PhaseRow, mc_nodal_experiment, phase_transition_experiment,
                          reference_mean)
from .stats import KSReport, NCLTReport, clt_test, lag1_autocorrelation, nclt_compare, nclt_draws, standardize

__all__ = [
    "ExperimentConfig", "ExperimentResult", "KSReport", "NCLTReport", "PhaseRow", "arithmetic_config",
    "berry_config", "clt_test", "lag1_autocorrelation", "mc_nodal_experiment", "nclt_compare", "nclt_draws",
    "phase_transition_experiment", "read_config_file", "reference_mean", "standardize",
]
