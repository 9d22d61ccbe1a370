"""Discrete-event simulation of the commitment protocol, with trace checkers and metrics."""

from .checks import Verdict, check_liveness, check_local_soundness, check_mergeability, run_checks
from .engine import Simulation, run
from .metrics import Metrics, metrics
from .scenario import InvalidScenario, Scenario, load_scenario, parse_scenario, validate_scenario
from .trace import Trace

__all__ = [
    "InvalidScenario",
    "Metrics",
    "Scenario",
    "Simulation",
    "Trace",
    "Verdict",
    "check_liveness",
    "check_local_soundness",
    "check_mergeability",
    "load_scenario",
    "metrics",
    "parse_scenario",
    "run",
    "run_checks",
    "validate_scenario",
]
