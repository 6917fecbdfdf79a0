"""Named checks. Each takes a :class:`RunContext` and returns a :class:`CheckResult`.

Check names equal the acceptance identifiers used in reports. Tolerances are
fixed here; scenario ``[params]`` only select windows, seeds and expected
values.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import analysis as A
from ..equilibria import (
    find_boundary_equilibria_single,
    solve_complex_balanced_equilibrium,
    solve_single_reversible_equilibrium,
)
from ..grid import SpatialGrid, estimate_regularity_constant, poincare_constant
from ..network import DissipationClass, MassAction, check_complex_balance, classify_dissipation, growth_exponent
from ..solver import CutoffPhi, Trajectory, averaged_residual, lipschitz_estimate, lipschitz_on_box, simulate, simulate_ode
from .scenario import ConfigError, Scenario, build_config

Inequality = A.Inequality


@dataclass
class CheckResult:
    name: str
    passed: bool
    inequalities: list[Inequality] = field(default_factory=list)
    details: dict = field(default_factory=dict)
    skipped: bool = False
    error: Optional[str] = None
    elapsed: float = 0.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "skipped": self.skipped,
            "error": self.error,
            "elapsed": round(self.elapsed, 3),
            "inequalities": [q.as_dict() for q in self.inequalities],
            "details": self.details,
        }

    def line(self) -> str:
        verdict = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        extra = f" ({self.error})" if self.error else ""
        return f"{verdict} {self.name} [{self.elapsed:.2f}s]{extra}"


class RunContext:
    """Lazily builds the config and trajectory of a scenario; caches both."""

    def __init__(self, scenario: Optional[Scenario] = None, seed_override: Optional[int] = None):
        self.scenario = scenario
        self.seed_override = seed_override
        self._config = None
        self._trajectory: Optional[Trajectory] = None

    @property
    def params(self) -> dict:
        return self.scenario.params if self.scenario is not None else {}

    def seed(self, default: int = 0) -> int:
        return self.seed_override if self.seed_override is not None else int(self.params.get("seed", default))

    @property
    def config(self):
        if self._config is None:
            if self.scenario is None:
                raise ConfigError("this check needs a scenario")
            self._config = build_config(self.scenario, seed_override=self.seed_override)
        return self._config

    @property
    def trajectory(self) -> Trajectory:
        if self._trajectory is None:
            self._trajectory = simulate(self.config)
        return self._trajectory


CHECKS: dict[str, Callable[[RunContext], CheckResult]] = {}
STANDALONE: set[str] = set()


def register(name: str, standalone: bool = False):
    def deco(fn):
        CHECKS[name] = fn
        if standalone:
            STANDALONE.add(name)
        return fn

    return deco


def run_check(name: str, ctx: RunContext) -> CheckResult:
    t0 = time.perf_counter()
    try:
        res = CHECKS[name](ctx)
    except ConfigError:
        raise
    except Exception as exc:  # a check that cannot be evaluated fails, with the reason recorded
        res = CheckResult(name, False, error=f"{type(exc).__name__}: {exc}")
    res.elapsed = time.perf_counter() - t0
    return res


def _result(name: str, checks: list[Inequality], **details) -> CheckResult:
    return CheckResult(name, all(q.holds for q in checks), checks, details)


def _network_class(ctx: RunContext) -> Optional[DissipationClass]:
    f = ctx.config.nonlinearity
    return classify_dissipation(f.network) if isinstance(f, MassAction) else None


def _no_blowup(traj: Trajectory) -> Inequality:
    return Inequality.check("no blow-up (flag)", float(traj.blow_up), "<=", 0.0)


# ---------------------------------------------------------------------------
# Trajectory checks


@register("mass-dissipation")
def check_mass_dissipation(ctx: RunContext) -> CheckResult:
    cls = _network_class(ctx)
    if cls is None or cls is DissipationClass.INDEFINITE:
        return CheckResult("mass-dissipation", True, skipped=True, details={"reason": f"network class {cls}"})
    traj = ctx.trajectory
    tol = 1e-10 * ctx.config.stride
    mass = traj.diagnostics["total_mass"]
    checks = [
        _no_blowup(traj),
        Inequality.check("max increase of total L1 mass per sample", A.max_increase(mass), "<=", tol),
    ]
    if cls is DissipationClass.CONSERVATIVE:
        drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
        checks.append(Inequality.check("relative mass drift", drift, "<=", 1e-10))
    return _result("mass-dissipation", checks, network_class=cls.value, mass_initial=float(mass[0]), mass_final=float(mass[-1]))


@register("equal-diffusion-maxprin")
def check_equal_diffusion_maxprin(ctx: RunContext) -> CheckResult:
    cfg = ctx.config
    cls = _network_class(ctx)
    if cls is None or cls is DissipationClass.INDEFINITE:
        return CheckResult("equal-diffusion-maxprin", True, skipped=True, details={"reason": f"network class {cls}"})
    traj = ctx.trajectory
    z = traj.diagnostics["sum_Linf"]
    checks = [
        Inequality.check("d_max - d_min", cfg.d_max - cfg.d_min, "<=", 0.0),
        _no_blowup(traj),
        Inequality.check("max increase of ||sum_i u_i||_inf per sample", A.max_increase(z), "<=", 1e-10 * cfg.stride),
    ]
    return _result("equal-diffusion-maxprin", checks, sum_Linf_initial=float(z[0]), sum_Linf_final=float(z[-1]))


def _window(ctx: RunContext, default=(0.02, 0.5)) -> tuple[float, float]:
    w = ctx.params.get("window", default)
    return float(w[0]), float(w[1])


@register("averages-decay")
def check_averages_decay(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    win = _window(ctx)
    dev = traj.diagnostics["dev_Linf"].sum(axis=1)
    fit = A.fit_exponential(traj.times, dev, win)
    M = float(traj.diagnostics["Linf"].max())
    C_M = lipschitz_on_box(cfg.nonlinearity, M, seed=ctx.seed())
    C_omega = poincare_constant(cfg.grid)
    delta = A.poincare_gap(cfg.d_min, C_omega, C_M)
    fit2 = A.fit_exponential(traj.times, traj.diagnostics["dev_L2sq"], win)
    checks = [
        _no_blowup(traj),
        Inequality.check("lambda of sum ||u_i - avg u_i||_inf", fit.lam, ">", 0.0),
        Inequality.check("r^2 of that fit", fit.r2, ">=", 0.99),
        Inequality.check("delta = 2 d_min C_Omega - C(M)", delta, ">", 0.0),
        Inequality.check("L2-deviation decay rate vs 0.8 delta", fit2.lam, ">=", 0.8 * delta),
    ]
    return _result(
        "averages-decay", checks, fit_Linf=fit.as_dict(), fit_L2sq=fit2.as_dict(), C_M=C_M, C_Omega=C_omega, delta=delta, M=M
    )


@register("averaged-ode-residual")
def check_averaged_ode_residual(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    win = _window(ctx)
    g = averaged_residual(traj, cfg.nonlinearity)
    gnorm = np.abs(g).max(axis=1)
    details = {"max_abs_g": float(gnorm.max())}
    fit = A.fit_exponential(traj.times, gnorm, win)
    checks = [
        Inequality.check("lambda_g", fit.lam, ">", 0.0),
        Inequality.check("r^2 of ||g||_inf fit", fit.r2, ">=", 0.95),
    ]
    return _result("averaged-ode-residual", checks, fit=fit.as_dict(), **details)


def _distance(values: np.ndarray, target) -> float:
    target = np.asarray(target, float).reshape((-1,) + (1,) * (values.ndim - 1))
    return float(np.max(np.abs(values - target)))


@register("gac-large-diffusion")
def check_gac(ctx: RunContext) -> CheckResult:
    cfg = ctx.config
    f = cfg.nonlinearity
    expected = np.asarray(ctx.params.get("expected_equilibrium", cfg.equilibrium), float)
    cb = check_complex_balance(f.network, expected)
    avg0 = cfg.initial_values().reshape(cfg.m, -1).mean(axis=1)
    cbe = solve_complex_balanced_equilibrium(f.network, avg0)
    traj = ctx.trajectory
    ent = traj.diagnostics["entropy"]
    dist = _distance(traj.fields[-1], cbe.u_inf)
    checks = [
        _no_blowup(traj),
        Inequality.check("complex-balance residual at expected CBE", cb.max_residual, "<=", 1e-12 * cb.scale),
        Inequality.check("|CBE - expected|_inf", float(np.max(np.abs(cbe.u_inf - expected))), "<=", 1e-8),
        Inequality.check("final L_inf distance to CBE", dist, "<=", 1e-5),
        Inequality.check("max entropy increase per sample", A.max_increase(ent), "<=", 1e-9),
    ]
    return _result("gac-large-diffusion", checks, cbe=cbe.u_inf.tolist(), entropy_initial=float(ent[0]), entropy_final=float(ent[-1]))


@register("ode-pde-agreement")
def check_ode_pde(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    avg = traj.diagnostics["avg"]
    ode = simulate_ode(cfg.nonlinearity, avg[0], cfg.dt, cfg.t_end, stride=cfg.stride)
    if ode.fields.shape != avg.shape:
        raise RuntimeError("ODE and PDE sample grids differ")
    err = float(np.max(np.abs(avg - ode.fields)))
    checks = [_no_blowup(traj), Inequality.check("sup_t |avg u(t) - v(t)|_inf", err, "<=", 1e-3)]
    return _result("ode-pde-agreement", checks)


def _quasi_uniform(cfg, mu: float, seed: int) -> A.RegimeReport:
    cache: dict = {}

    def provider(d, p):
        key = (round(d, 12), round(p, 12))
        if key not in cache:
            cache[key] = estimate_regularity_constant(cfg.grid, d, p, sources=4, T=0.5, dt=1e-2, seed=seed).C_hat
        return cache[key]

    return A.quasi_uniform_condition(cfg.diffusion, cfg.grid.n, mu, provider)


@register("quasi-uniform-condition")
def check_quasi_uniform_condition(ctx: RunContext) -> CheckResult:
    cfg = ctx.config
    f = cfg.nonlinearity
    mu = float(ctx.params.get("mu", growth_exponent(f.network) if isinstance(f, MassAction) else 1.0))
    rep = _quasi_uniform(cfg, mu, ctx.seed())
    return _result("quasi-uniform-condition", rep.checks, report=rep.as_dict())


@register("boundary-equilibria")
def check_boundary_equilibria(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    net = cfg.nonlinearity.network
    mu = growth_exponent(net)
    avg0 = cfg.initial_values().reshape(cfg.m, -1).mean(axis=1)
    eq = solve_single_reversible_equilibrium(net, avg0)
    expected = np.asarray(ctx.params.get("expected_equilibrium", eq.u_inf), float)
    boundary = find_boundary_equilibria_single(net, avg0)
    report = A.uniform_bound_report(traj)
    final = traj.fields[-1]
    checks = [
        _no_blowup(traj),
        Inequality.check("|mu - expected mu|", abs(mu - float(ctx.params.get("mu", mu))), "<=", 0.0),
        Inequality.check("|u_inf - expected|_inf", float(np.max(np.abs(eq.u_inf - expected))), "<=", 1e-8),
        Inequality.check("final L_inf distance to positive equilibrium", _distance(final, eq.u_inf), "<=", 1e-4),
        Inequality.check("tail ratio", report.tail_ratio, "<=", 1.05),
        Inequality.check("boundary equilibria found", len(boundary), ">=", 1),
    ]
    expect_b = ctx.params.get("expected_boundary")
    if expect_b is not None:
        found = min((float(np.max(np.abs(b.u_inf - np.asarray(expect_b)))) for b in boundary), default=np.inf)
        checks.append(Inequality.check("|boundary equilibrium - expected|_inf", found, "<=", 1e-12))
    for b in boundary:
        checks.append(Inequality.check(f"final distance to boundary equilibrium {b.u_inf.tolist()}", _distance(final, b.u_inf), ">", 1e-4))
    qu = _quasi_uniform(cfg, mu, ctx.seed())
    return _result(
        "boundary-equilibria",
        checks,
        mu=mu,
        positive_equilibrium=eq.u_inf.tolist(),
        boundary_equilibria=[b.u_inf.tolist() for b in boundary],
        uniform_bound=report.as_dict(),
        quasi_uniform=qu.as_dict(),
    )


@register("truncation-consistency")
def check_truncation_consistency(ctx: RunContext) -> CheckResult:
    cfg = ctx.config
    r = cfg.truncation_radius
    if r is None:
        r = float(ctx.params.get("truncation_radius", 10.0))
        other = build_config(ctx.scenario, seed_override=ctx.seed_override, truncation_radius=r)
        plain, truncated = ctx.trajectory, simulate(other)
    else:
        other = build_config(ctx.scenario, seed_override=ctx.seed_override, truncation_radius=None)
        plain, truncated = simulate(other), ctx.trajectory
    z0 = np.zeros(cfg.m) if cfg.z0 is None else np.asarray(cfg.z0)
    shifted = plain.fields - z0.reshape((1, -1) + (1,) * cfg.grid.n)
    sup_vec = float(np.sqrt(np.sum(shifted**2, axis=1)).max())
    worst = 0.0
    for key, arr in plain.diagnostics.items():
        worst = max(worst, float(np.max(np.abs(arr - truncated.diagnostics[key]))))
    checks = [
        Inequality.check("sup_t |u(t) - z0| (vector norm) vs r", sup_vec, "<", r),
        Inequality.check("max diagnostic difference truncated vs plain", worst, "<=", 1e-10),
    ]
    return _result("truncation-consistency", checks, radius=r)


@register("small-data")
def check_small_data(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    eps = float(ctx.params["eps"])
    z0 = np.zeros(cfg.m) if cfg.z0 is None else np.asarray(cfg.z0)
    sup = max(_distance(u, z0) for u in traj.fields)
    checks = [
        _no_blowup(traj),
        Inequality.check("t_final", float(traj.times[-1]), ">=", cfg.t_end),
        Inequality.check("sup_t ||u - z0||_inf vs 10 eps", sup, "<=", 10 * eps),
    ]
    if "lyapunov" in traj.diagnostics:
        lyap = traj.diagnostics["lyapunov"]
        checks.append(Inequality.check("max Lyapunov increase per sample", A.max_increase(lyap), "<=", 1e-8))
    return _result("small-data", checks, sup_deviation=sup, eps=eps)


@register("gronwall-ceiling")
def check_gronwall(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    if cfg.truncation_radius is None or not cfg.rescale:
        raise ConfigError("gronwall-ceiling needs a truncated, rescaled run")
    z0 = np.zeros(cfg.m) if cfg.z0 is None else np.asarray(cfg.z0)
    L = lipschitz_estimate(cfg.nonlinearity, CutoffPhi(cfg.truncation_radius), seed=ctx.seed(), z0=cfg.z0)
    a = cfg.time_scale
    K, _ = A.large_diffusion_K(cfg.grid.n)
    u0 = cfg.initial_values()
    M = _distance(u0, z0)
    ceiling = A.gronwall_ceiling(M, a, L.value, K)
    mask = traj.times <= K + 1 + 1e-12
    sup_t = np.array([_distance(u, z0) for u in traj.fields])
    pointwise = M * np.exp(a * L.value * traj.times) * (1 + 1e-3)
    checks = [
        _no_blowup(traj),
        Inequality.check("a L_r", a * L.value, "<=", 1.0 + 1e-12),
        Inequality.check("t_final vs K+1", float(traj.times[-1]), ">=", K + 1 - 1e-12),
        Inequality.check("sup_{t<=K+1} ||v(t)||_inf vs 1.001 ceiling", float(sup_t[mask].max()), "<=", 1.001 * ceiling),
        Inequality.check("max_t ||v(t)||_inf / (M e^{a L_r t} (1+1e-3))", float(np.max(sup_t / pointwise)), "<=", 1.0),
    ]
    return _result("gronwall-ceiling", checks, L_r=L.value, L_samples=L.samples, a=a, K=K, M=M, ceiling=ceiling)


@register("close-to-equilibrium")
def check_close_to_equilibrium(ctx: RunContext) -> CheckResult:
    cfg, traj = ctx.config, ctx.trajectory
    target = np.asarray(cfg.z0 if cfg.z0 is not None else cfg.equilibrium, float)
    dist = np.array([_distance(u, target) for u in traj.fields])
    fit = A.fit_exponential(traj.times, dist, ctx.params.get("window"))
    checks = [
        _no_blowup(traj),
        Inequality.check("sup_t distance / initial distance", float(dist.max() / dist[0]), "<=", 10.0),
        Inequality.check("decay rate of ||u - u_inf||_inf", fit.lam, ">", 0.0),
        Inequality.check("r^2 of that fit", fit.r2, ">=", 0.9),
        Inequality.check("final distance", float(dist[-1]), "<=", 1e-6),
    ]
    return _result("close-to-equilibrium", checks, fit=fit.as_dict(), initial_distance=float(dist[0]))


@register("uniform-bound")
def check_uniform_bound(ctx: RunContext) -> CheckResult:
    rep = A.uniform_bound_report(ctx.trajectory)
    checks = [
        Inequality.check("no blow-up (flag)", float(not rep.global_solution), "<=", 0.0),
        Inequality.check("tail ratio", rep.tail_ratio, "<=", 1.05),
    ]
    return _result("uniform-bound", checks, report=rep.as_dict())


# ---------------------------------------------------------------------------
# Standalone checks


@register("scaling-law", standalone=True)
def check_scaling_law(ctx: RunContext) -> CheckResult:
    p = ctx.params
    grid = SpatialGrid.interval(int(p.get("N", 64)))
    ds = [1.0, 2.0, 4.0, 8.0]
    seed = ctx.seed()
    est = [estimate_regularity_constant(grid, d, 2.0, sources=8, T=1.0, dt=1e-2, seed=seed) for d in ds]
    prod = np.array([e.C_hat * d for e, d in zip(est, ds)])
    mean = prod.mean()
    checks = [Inequality.check(f"C_hat(d) d / mean at d={d:g}", x / mean, "<=", 1.2) for d, x in zip(ds, prod)]
    checks += [Inequality.check(f"C_hat(d) d / mean at d={d:g} (lower)", x / mean, ">=", 0.8) for d, x in zip(ds, prod)]
    for (d1, e1), (d2, e2) in zip(zip(ds, est), zip(ds[1:], est[1:])):
        ratio = e2.C_hat * 2 / e1.C_hat
        checks.append(Inequality.check(f"2 C_hat({d2:g}) / C_hat({d1:g}) <= 1.2", ratio, "<=", 1.2))
        checks.append(Inequality.check(f"2 C_hat({d2:g}) / C_hat({d1:g}) >= 0.8", ratio, ">=", 0.8))
    checks.append(Inequality.check("C_hat(1) at p=2", est[0].C_hat, "<=", 1.0 + 1e-9))
    return _result("scaling-law", checks, C_hat={f"{d:g}": e.C_hat for d, e in zip(ds, est)}, T=1.0, dt=1e-2)


@register("poincare", standalone=True)
def check_poincare(ctx: RunContext) -> CheckResult:
    Ns = [32, 64, 128]
    errs = [abs(poincare_constant(SpatialGrid.interval(N)) - np.pi**2) for N in Ns]
    checks = []
    for N, e1, e2 in zip(Ns[1:], errs, errs[1:]):
        checks.append(Inequality.check(f"error ratio at N={N}", e1 / e2, ">=", 3.5))
        checks.append(Inequality.check(f"error ratio at N={N} (upper)", e1 / e2, "<=", 4.5))
    return _result("poincare", checks, errors=dict(zip(map(str, Ns), errs)))


@register("exponent-schedules", standalone=True)
def check_exponent_schedules(ctx: RunContext) -> CheckResult:
    checks = []
    for n, mu, K in [(1, 2.0, 2), (2, 2.0, 3), (1, 1.0, 0)]:
        s = A.bootstrap_schedule(n, mu)
        checks.append(Inequality.check(f"|K(n={n}, mu={mu:g}) - {K}|", abs(s.K - K), "<=", 0))
    for n, K in [(1, 0), (2, 1), (4, 2)]:
        checks.append(Inequality.check(f"|large-diffusion K(n={n}) - {K}|", abs(A.large_diffusion_K(n)[0] - K), "<=", 0))
    for n in range(1, 7):
        for mu in (1.0, 1.5, 2.0, 3.0, 4.0):
            checks += A.schedule_inequalities(A.bootstrap_schedule(n, mu))
    return _result("exponent-schedules", checks)


def _property(name: str):
    def fn(ctx: RunContext) -> CheckResult:
        from . import properties

        checks = getattr(properties, name.replace("-", "_"))(seed=ctx.seed())
        return _result(name, checks)

    register(name, standalone=True)(fn)


for _name in ("network-properties", "equilibria-properties", "grid-properties", "analysis-properties"):
    _property(_name)
