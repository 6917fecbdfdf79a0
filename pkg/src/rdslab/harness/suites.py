"""Running scenarios, named suites and diffusion sweeps; writing report files."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..analysis import fit_exponential
from ..grid import SolverError
from ..solver import NumericalError, simulate
from .checks import STANDALONE, CheckResult, RunContext, run_check
from .scenario import ConfigError, Scenario, build_config, diffusion_vectors, load_scenario

EXIT_PASS, EXIT_CHECK_FAILURE, EXIT_CONFIG_ERROR, EXIT_NUMERICAL = 0, 1, 2, 3


def _dump(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


@dataclass
class ScenarioReport:
    name: str
    status: int
    results: list[CheckResult] = field(default_factory=list)
    blow_up: bool = False
    error: Optional[str] = None
    outdir: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status == EXIT_PASS

    def as_dict(self) -> dict:
        return {
            "scenario": self.name,
            "status": self.status,
            "passed": self.passed,
            "blow_up": self.blow_up,
            "error": self.error,
            "checks": [r.as_dict() for r in self.results],
        }


def _as_scenario(scenario: Union[str, Scenario]) -> Scenario:
    return scenario if isinstance(scenario, Scenario) else load_scenario(scenario)


def run_scenario(
    scenario: Union[str, Scenario],
    outdir: Optional[str] = None,
    seed_override: Optional[int] = None,
) -> ScenarioReport:
    """Simulate a scenario, run its checks and write diagnostics.csv, summary.json, report.json.

    Config problems give status 2 before anything is computed; an unexpected
    blow-up or a solver failure gives 3; a failed check gives 1.
    """
    try:
        scenario = _as_scenario(scenario)
        ctx = RunContext(scenario, seed_override)
        ctx.config  # builds and validates before any compute
    except ConfigError as exc:
        name = scenario.name if isinstance(scenario, Scenario) else str(scenario)
        return ScenarioReport(name, EXIT_CONFIG_ERROR, error=str(exc))

    report = ScenarioReport(scenario.name, EXIT_PASS, outdir=outdir)
    try:
        traj = ctx.trajectory
    except (NumericalError, SolverError) as exc:
        report.status, report.error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
        _write(report, None, outdir)
        return report
    report.blow_up = traj.blow_up
    expect_blowup = bool(scenario.option("expect_blowup", False))
    if traj.blow_up and not expect_blowup:
        report.status, report.error = EXIT_NUMERICAL, f"blow-up at t={traj.blow_up_time}"
    elif expect_blowup and not traj.blow_up:
        report.status, report.error = EXIT_CHECK_FAILURE, "expected blow-up did not occur"
    if report.status != EXIT_NUMERICAL:
        try:
            report.results = [run_check(name, ctx) for name in scenario.checks]
        except ConfigError as exc:
            report.status, report.error = EXIT_CONFIG_ERROR, str(exc)
        if report.status == EXIT_PASS and not all(r.passed for r in report.results):
            report.status = EXIT_CHECK_FAILURE
    _write(report, traj, outdir)
    return report


def _write(report: ScenarioReport, traj, outdir: Optional[str]) -> None:
    if outdir is None:
        return
    os.makedirs(outdir, exist_ok=True)
    if traj is not None:
        traj.write(outdir)
    _dump(os.path.join(outdir, "report.json"), report.as_dict())


# ---------------------------------------------------------------------------
# Suites

SUITES: dict[str, dict[str, list[str]]] = {
    "quasi-uniform": {"scenarios": ["mass-dissipation", "equal-diffusion-maxprin"]},
    "large-diffusion": {"scenarios": ["gronwall-ceiling"], "sweeps": ["reversible-sweep"]},
    "small-data": {"scenarios": ["small-data"]},
    "averages-ode": {"scenarios": ["averages-decay"]},
    "gac": {"scenarios": ["gac-large-diffusion", "ode-pde-agreement"]},
    "boundary-equilibria": {"scenarios": ["boundary-equilibria"]},
    "close-to-equilibrium": {"scenarios": ["close-to-equilibrium"]},
    "lemmas": {
        "checks": [
            "scaling-law",
            "poincare",
            "exponent-schedules",
            "network-properties",
            "equilibria-properties",
            "grid-properties",
            "analysis-properties",
        ]
    },
}


@dataclass
class SuiteReport:
    name: str
    scenarios: list[ScenarioReport] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    sweeps: list["SweepTable"] = field(default_factory=list)

    @property
    def status(self) -> int:
        codes = [s.status for s in self.scenarios]
        codes += [EXIT_CHECK_FAILURE for c in self.checks if not c.passed]
        codes += [EXIT_CHECK_FAILURE for t in self.sweeps if t.trend != "increasing"]
        for code in (EXIT_CONFIG_ERROR, EXIT_NUMERICAL, EXIT_CHECK_FAILURE):
            if code in codes:
                return code
        return EXIT_PASS

    @property
    def passed(self) -> bool:
        return self.status == EXIT_PASS

    def verdicts(self) -> dict[str, bool]:
        out = {c.name: c.passed for c in self.checks}
        for s in self.scenarios:
            for r in s.results:
                out[r.name] = out.get(r.name, True) and r.passed and s.passed
        return out

    def as_dict(self) -> dict:
        return {
            "suite": self.name,
            "status": self.status,
            "passed": self.passed,
            "verdicts": self.verdicts(),
            "scenarios": [s.as_dict() for s in self.scenarios],
            "checks": [c.as_dict() for c in self.checks],
            "sweeps": [t.as_dict() for t in self.sweeps],
        }


def run_suite(name: str, outdir: Optional[str] = None, seed_override: Optional[int] = None) -> SuiteReport:
    """Run the shipped scenarios and standalone checks of a suite."""
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
    spec = SUITES[name]
    rep = SuiteReport(name)
    sub = (lambda x: os.path.join(outdir, x)) if outdir else (lambda x: None)
    for scen in spec.get("scenarios", []):
        rep.scenarios.append(run_scenario(scen, sub(scen), seed_override))
    ctx = RunContext(None, seed_override)
    for check in spec.get("checks", []):
        assert check in STANDALONE
        rep.checks.append(run_check(check, ctx))
    for scen in spec.get("sweeps", []):
        s = load_scenario(scen)
        rep.sweeps.append(sweep_diffusion(s, s.params.get("factors", [1, 8]), sub(scen), seed_override))
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        _dump(os.path.join(outdir, "report.json"), rep.as_dict())
    return rep


# ---------------------------------------------------------------------------
# Diffusion sweeps


@dataclass
class SweepRow:
    factor: float
    sup_Linf: float
    lam: float
    global_solution: bool
    r2: float = math.nan


@dataclass
class SweepTable:
    scenario: str
    rows: list[SweepRow]

    @property
    def trend(self) -> str:
        lams = [r.lam for r in self.rows if r.global_solution and math.isfinite(r.lam)]
        if len(lams) < 2:
            return "n/a"
        diffs = np.diff(lams)
        if np.all(diffs > 0):
            return "increasing"
        if np.all(diffs < 0):
            return "decreasing"
        return "mixed"

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trend": self.trend,
            "rows": [vars(r) for r in self.rows],
        }

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("factor,sup_Linf,lambda,r2,global\n")
            for r in self.rows:
                fh.write(f"{r.factor!r},{r.sup_Linf!r},{r.lam!r},{r.r2!r},{int(r.global_solution)}\n")


def sweep_diffusion(
    scenario: Union[str, Scenario],
    factors: Sequence[float],
    outdir: Optional[str] = None,
    seed_override: Optional[int] = None,
) -> SweepTable:
    """Rerun ``scenario`` with d scaled by each factor and fit the decay of sum ||u_i - avg u_i||_inf."""
    scenario = _as_scenario(scenario)
    base = diffusion_vectors(scenario, build_config(scenario, seed_override=seed_override).m)[0]
    window = scenario.params.get("window")
    rows = []
    for factor in factors:
        cfg = build_config(scenario, diffusion=base * float(factor), seed_override=seed_override)
        traj = simulate(cfg)
        sup = float(traj.diagnostics["Linf"].max())
        lam = r2 = math.nan
        if not traj.blow_up:
            try:
                fit = fit_exponential(traj.times, traj.diagnostics["dev_Linf"].sum(axis=1), window)
                lam, r2 = fit.lam, fit.r2
            except ValueError:
                pass
        rows.append(SweepRow(float(factor), sup, lam, not traj.blow_up, r2))
    table = SweepTable(scenario.name, rows)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        table.to_csv(os.path.join(outdir, "sweep.csv"))
        _dump(os.path.join(outdir, "report.json"), table.as_dict())
    return table
