"""Satellite-user matching for distributed on-board multi-user detection.

Quick start::

    from mudalloc import ScenarioConfig, build_scenario, solve
    sc = build_scenario(ScenarioConfig(rng_seed=1))
    report = solve(sc, q_s=3, q_l=0)
    report.rounded_sum_rate, report.load
"""
__version__ = "0.1.0"

from .baselines import (
    BaselineKind,
    centralized_allocate,
    exhaustive_allocate,
    greedy_allocate,
    round_robin_allocate,
)
from .errors import ConfigError, InfeasibleError, MudAllocError, NumericalError
from .harness import ExperimentPlan, converge_trace, run_experiment, tradeoff_report
from .kernels import BACKEND
from .polytope import MatchingPolytope, PGAConfig, project
from .ratemodel import (
    MatchingMatrix,
    RateModelParams,
    check_feasibility,
    clamped_q_l,
    processing_load,
    residual_interference,
    sum_rate,
)
from .scenario import Scenario, ScenarioConfig, build_scenario
from .solver import AllocationReport, SolverConfig, solve

__all__ = [
    "__version__", "BACKEND",
    "BaselineKind", "centralized_allocate", "exhaustive_allocate", "greedy_allocate",
    "round_robin_allocate",
    "ConfigError", "InfeasibleError", "MudAllocError", "NumericalError",
    "ExperimentPlan", "converge_trace", "run_experiment", "tradeoff_report",
    "MatchingPolytope", "PGAConfig", "project",
    "MatchingMatrix", "RateModelParams", "check_feasibility", "clamped_q_l",
    "processing_load", "residual_interference", "sum_rate",
    "Scenario", "ScenarioConfig", "build_scenario",
    "AllocationReport", "SolverConfig", "solve",
]
