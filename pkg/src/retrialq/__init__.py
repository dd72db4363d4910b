"""Two-class batch-arrival retrial queue with guard servers.

Analytic stationary solver (level-dependent censoring), performance
measures, guard/capacity optimization, and independent verification via
discrete-event simulation and brute-force truncated-chain solves.
"""

__version__ = "0.1.0"

from .errors import (BudgetExhaustedError, ConfigError, ConvergenceError,
                     RetrialQError, UnstableError)
from .models import (BmapSpec, MmppSpec, PhSpec, SystemConfig, Violation,
                     arrival_rate, batch_arrival_rate, ensure_valid,
                     retrial_rate, service_rate, stationary_vector, validate)
from .generator import StateIndex, build_generator, state_count
from .stability import StabilityReport, det_derivative_check, stability_check
from .solver import StationaryDistribution, solve_stationary
from .measures import PerformanceReport, performance_report
from .optimize import OptimizationResult, optimize_c, optimize_g
from .oracle import brute_force_ctmc, first_passage_matrix
from .sim import SimEstimate, simulate
from .configio import dump_config, load_config

__all__ = [
    "BmapSpec", "MmppSpec", "PhSpec", "SystemConfig", "Violation",
    "StateIndex", "StabilityReport", "StationaryDistribution",
    "PerformanceReport", "OptimizationResult", "SimEstimate",
    "RetrialQError", "ConfigError", "UnstableError", "ConvergenceError",
    "BudgetExhaustedError",
    "arrival_rate", "batch_arrival_rate", "retrial_rate", "service_rate",
    "validate", "ensure_valid", "stationary_vector", "state_count",
    "build_generator", "stability_check", "det_derivative_check",
    "solve_stationary", "performance_report", "optimize_g", "optimize_c",
    "brute_force_ctmc", "first_passage_matrix", "simulate",
    "load_config", "dump_config",
]
