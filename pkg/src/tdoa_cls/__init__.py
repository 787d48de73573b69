"""Range-difference (TDoA) source localization by exact constrained least squares."""
from .bench import RmseTable, Scenario, builtin_scenario, run_monte_carlo
from .estimators import Estimate, Method, estimate, estimate_cls, estimate_uls
from .geometry import (
    LinearizedSystem,
    RangeDiffSet,
    SensorArray,
    build_system,
    check_assumption1,
    check_local_pe,
    load_scenario,
    simulate_measurements,
)
from .solver import Branch, Classification, ClsSolution, SolverOptions, solve_cls, verify_kkt
from .spectrum import DegenerateSpectrum, SpectrumInfo, pd_interval

__version__ = "0.1.0"

__all__ = [
    "SensorArray",
    "RangeDiffSet",
    "LinearizedSystem",
    "build_system",
    "simulate_measurements",
    "check_local_pe",
    "check_assumption1",
    "load_scenario",
    "SpectrumInfo",
    "DegenerateSpectrum",
    "pd_interval",
    "Branch",
    "Classification",
    "ClsSolution",
    "SolverOptions",
    "solve_cls",
    "verify_kkt",
    "Method",
    "Estimate",
    "estimate",
    "estimate_cls",
    "estimate_uls",
    "Scenario",
    "RmseTable",
    "builtin_scenario",
    "run_monte_carlo",
]
