"""Randomized module invariants run by the ``lemmas`` suite.

Every function returns a list of :class:`~rdslab.analysis.Inequality` so the
results land in report.json next to the acceptance checks.
"""

from __future__ import annotations

import numpy as np

from .. import analysis as A
from ..equilibria import (
    relative_entropy_vector,
    solve_complex_balanced_equilibrium,
    solve_single_reversible_equilibrium,
)
from ..grid import SpatialGrid, gradient, heat_solve_implicit, laplacian, lp_norm, poincare_constant
from ..network import (
    DissipationClass,
    MassAction,
    classify_dissipation,
    conservation_laws,
    format_network,
    growth_exponent,
    parse_network,
)

Inequality = A.Inequality
SAMPLES = 1000

CORPUS: dict[str, str] = {
    "binding": "A + B -> C @ 1",
    "isomer": "A <-> B @ 1, 1",
    "cycle": "A -> B @ 1\nB -> C @ 1\nC -> A @ 1",
    "autocatalytic": "A + B <-> 2 B @ 1, 2",
    "dimer-decay": "2 A -> A @ 0.5\nA + B -> 0 @ 1",
    "fractional": "1.5 A + B <-> C @ 2, 0.7",
    "growth": "A -> 2 A @ 1\nA + B -> B @ 1",
}


def corpus() -> dict:
    return {name: parse_network(text) for name, text in CORPUS.items()}


def network_properties(seed: int = 0) -> list[Inequality]:
    rng = np.random.default_rng(seed)
    out = []
    for name, net in corpus().items():
        f = MassAction(net)
        m = net.m
        # quasi-positivity on faces
        worst = np.inf
        for i in range(m):
            u = rng.uniform(0, 10, size=(m, SAMPLES))
            u[i] = 0.0
            worst = min(worst, float(f(u)[i].min()))
        out.append(Inequality.check(f"{name}: min f_i on face u_i = 0", worst, ">=", 0.0))

        u = rng.uniform(0.01, 10, size=(m, SAMPLES))
        fu = f(u)
        cls = classify_dissipation(net)
        if cls is DissipationClass.CONSERVATIVE:
            W = conservation_laws(net)
            rel = np.abs(W @ fu) / (1.0 + np.abs(fu).max(axis=0))
            out.append(Inequality.check(f"{name}: conservation residual", float(rel.max()), "<=", 1e-12))
        elif cls is DissipationClass.DISSIPATIVE:
            out.append(Inequality.check(f"{name}: max 1^T f(u)", float(fu.sum(axis=0).max()), "<=", 1e-12))

        mu = growth_exponent(net)
        C = m * sum(r.k * float(np.max(np.abs(np.asarray(r.beta) - np.asarray(r.alpha)))) for r in net.reactions)
        u = rng.uniform(0, 10, size=(m, SAMPLES))
        ratio = np.abs(f(u)).max(axis=0) / (1.0 + np.linalg.norm(u, axis=0) ** mu)
        out.append(Inequality.check(f"{name}: |f(u)| / (1 + |u|^mu) vs C", float(ratio.max()), "<=", C))

        again = parse_network(format_network(net))
        out.append(Inequality.check(f"{name}: parse-format-parse mismatch", float(again != net), "<=", 0.0))
    return out


def equilibria_properties(seed: int = 0) -> list[Inequality]:
    rng = np.random.default_rng(seed)
    out = []
    worst_neg, worst_zero = np.inf, 0.0
    for _ in range(SAMPLES):
        m = int(rng.integers(1, 5))
        u = rng.uniform(1e-3, 10, m)
        v = rng.uniform(1e-3, 10, m)
        e = relative_entropy_vector(u, v)
        worst_neg = min(worst_neg, e)
        if e == 0.0:
            worst_zero = max(worst_zero, float(np.max(np.abs(u - v))))
        worst_zero = max(worst_zero, relative_entropy_vector(u, u))
    out.append(Inequality.check("min relative entropy", worst_neg, ">=", 0.0))
    out.append(Inequality.check("entropy at u = u_inf / zero-entropy distance", worst_zero, "<=", 1e-14))

    nets = corpus()
    for name in ("isomer", "cycle", "autocatalytic"):
        net = nets[name]
        f = MassAction(net)
        W = conservation_laws(net)
        worst_res = worst_cls = worst_agree = 0.0
        for _ in range(20):
            u0 = rng.uniform(0.1, 5, net.m)
            sols = [solve_complex_balanced_equilibrium(net, u0)]
            if net.reversible_pair() is not None:
                sols.append(solve_single_reversible_equilibrium(net, u0))
                worst_agree = max(worst_agree, float(np.max(np.abs(sols[0].u_inf - sols[1].u_inf))))
            for s in sols:
                res = np.max(np.abs(f(s.u_inf))) / (1.0 + np.max(np.abs(f.flows(s.u_inf))))
                worst_res = max(worst_res, float(res))
                cls = np.abs(W @ s.u_inf - W @ u0) / np.maximum(np.abs(W @ u0), 1e-300)
                worst_cls = max(worst_cls, float(cls.max()) if cls.size else 0.0)
        out.append(Inequality.check(f"{name}: |f(u_inf)| / (1 + |flows|)", worst_res, "<=", 1e-10))
        out.append(Inequality.check(f"{name}: class-mass relative error", worst_cls, "<=", 1e-8))
        if net.reversible_pair() is not None:
            out.append(Inequality.check(f"{name}: bisection vs entropy solver", worst_agree, "<=", 1e-8))
    return out


def grid_properties(seed: int = 0) -> list[Inequality]:
    rng = np.random.default_rng(seed)
    out = []
    for grid in (SpatialGrid.interval(64), SpatialGrid.square(24), SpatialGrid((1.0, 2.0), (16, 20))):
        tag = f"grid {grid.counts}"
        worst = 0.0
        for _ in range(20):
            u = rng.normal(size=grid.shape)
            integral = float(laplacian(u, grid).sum()) * grid.cell_volume
            worst = max(worst, abs(integral) / (np.abs(u).max() * grid.size))
        out.append(Inequality.check(f"{tag}: |sum Lap u h^n| / (|u|_inf nodes)", worst, "<=", 1e-13))

        C = poincare_constant(grid)
        worst = np.inf
        for _ in range(100):
            u = rng.normal(size=grid.shape)
            u -= u.mean()
            energy = sum(float(np.sum(g * g)) for g in gradient(u, grid)) * grid.cell_volume
            worst = min(worst, energy / (float(np.sum(u * u)) * grid.cell_volume))
        out.append(Inequality.check(f"{tag}: Rayleigh quotient vs C_Omega", worst, ">=", C - 1e-9))

        worst = -np.inf
        for _ in range(20):
            u = rng.normal(size=grid.shape)
            d, dt = float(rng.uniform(0.1, 10)), float(rng.uniform(1e-4, 1e-1))
            w = heat_solve_implicit(u, grid, d, dt)
            for p in (1.0, 2.0, np.inf):
                worst = max(worst, lp_norm(w, grid, p) / lp_norm(u, grid, p))
        out.append(Inequality.check(f"{tag}: heat-step Lp contraction ratio", worst, "<=", 1.0 + 1e-12))
    return out


def analysis_properties(seed: int = 0) -> list[Inequality]:
    rng = np.random.default_rng(seed)
    out = []
    worst = -np.inf
    for _ in range(SAMPLES):
        a = float(rng.uniform(0, 10))
        eps = float(rng.uniform(0.01, 0.99))
        bound = A.young_bound(a, eps)
        xmax = a ** (1.0 / (1.0 - eps))
        X = np.linspace(0.0, 2.0 * max(xmax, 1e-12), 10_000)
        feasible = X[X <= a * X**eps * (1 + 1e-12)]
        worst = max(worst, float(feasible.max()) - bound * (1 + 1e-12))
    out.append(Inequality.check("max feasible X minus young_bound", worst, "<=", 0.0))

    worst_C = worst_lam = 0.0
    for _ in range(100):
        C, lam = float(rng.uniform(0.1, 10)), float(rng.uniform(0.01, 5))
        t = np.linspace(0, 5, 50)
        fit = A.fit_exponential(t, C * np.exp(-lam * t))
        worst_C = max(worst_C, abs(fit.C - C) / C)
        worst_lam = max(worst_lam, abs(fit.lam - lam))
    out.append(Inequality.check("planted C relative error", worst_C, "<=", 1e-10))
    out.append(Inequality.check("planted lambda error", worst_lam, "<=", 1e-10))

    for n in range(1, 7):
        for mu in (1.0, 1.5, 2.0, 2.5, 3.0, 5.0):
            out += A.schedule_inequalities(A.bootstrap_schedule(n, mu))
    return out
