"""Scenario files, named checks, suites and sweeps."""

from .checks import CHECKS, CheckResult, RunContext, run_check
from .scenario import ConfigError, Scenario, build_config, load_scenario, scenario_from_dict, shipped_scenarios
from .suites import SUITES, ScenarioReport, SuiteReport, SweepTable, run_scenario, run_suite, sweep_diffusion

__all__ = [
    "CHECKS",
    "SUITES",
    "CheckResult",
    "ConfigError",
    "RunContext",
    "Scenario",
    "ScenarioReport",
    "SuiteReport",
    "SweepTable",
    "build_config",
    "load_scenario",
    "run_check",
    "run_scenario",
    "run_suite",
    "scenario_from_dict",
    "shipped_scenarios",
    "sweep_diffusion",
]
