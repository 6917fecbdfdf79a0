"""IMEX time stepping for reaction-diffusion systems with Neumann boundaries.

Reaction terms are explicit, diffusion is backward Euler per species. A step
whose result leaves the nonnegative orthant (beyond a small tolerance) is
rejected and redone as two half steps, so sample times never drift.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import grid as G
from .equilibria import relative_entropy_field
from .grid import FieldState, SpatialGrid
from .network import Builtin, MassAction, ReactionNetwork, is_mass_action, species_names


class NumericalError(RuntimeError):
    """Base class for failures of the time integrators."""


class PositivityError(NumericalError):
    """Step halving could not keep a mass-action state nonnegative."""


# ---------------------------------------------------------------------------
# Cutoffs


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class CutoffPsi:
    """Smooth time cutoff: 0 for t <= tau, 1 for t >= tau + 1, cubic in between."""

    tau: float = 0.0

    def __call__(self, t):
        return _smoothstep(np.asarray(t, float) - self.tau)

    def derivative(self, t):
        s = np.asarray(t, float) - self.tau
        inside = (s > 0) & (s < 1)
        return np.where(inside, 6.0 * s * (1.0 - s), 0.0)


def psi_eval(cutoff: CutoffPsi, t):
    return cutoff(t)


def psi_deriv(cutoff: CutoffPsi, t):
    return cutoff.derivative(t)


@dataclass(frozen=True)
class CutoffPhi:
    """Radial cutoff equal to 1 on |x| <= r and 0 on |x| >= 2r.

    The gradient is bounded by 1.5/r; that is below 2 only when r >= 3/4.
    """

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("cutoff radius must be positive")

    @property
    def slope_bound(self) -> float:
        return 1.5 / self.r

    def radial(self, rho):
        return 1.0 - _smoothstep((np.asarray(rho, float) - self.r) / self.r)

    def __call__(self, x):
        """Evaluate at points x with the vector components along axis 0."""
        x = np.asarray(x, float)
        return self.radial(np.sqrt(np.sum(x * x, axis=0)))

    def gradient_norm(self, x):
        x = np.asarray(x, float)
        rho = np.sqrt(np.sum(x * x, axis=0))
        s = (rho - self.r) / self.r
        inside = (s > 0) & (s < 1)
        return np.where(inside, 6.0 * s * (1.0 - s) / self.r, 0.0)


def phi_eval(cutoff: CutoffPhi, x):
    return cutoff(x)


class Truncated:
    """The nonlinearity Phi_r(u - z0) f(u)."""

    def __init__(self, spec, cutoff: CutoffPhi, z0=None):
        self.spec = spec
        self.cutoff = cutoff
        self.m = spec.m
        self.z0 = None if z0 is None else np.asarray(z0, float)

    def factor(self, u):
        u = np.asarray(u, float)
        if self.z0 is not None:
            u = u - self.z0.reshape((-1,) + (1,) * (u.ndim - 1))
        return self.cutoff(u)

    def __call__(self, u):
        return self.factor(u) * self.spec(u)


# ---------------------------------------------------------------------------
# Lipschitz constants by sampling


@dataclass
class LipschitzEstimate:
    """Sampled lower estimate of a Lipschitz constant."""

    value: float
    samples: int
    pair_value: float
    growth_value: float


def _ball(rng, m, radius, count):
    g = rng.standard_normal((count, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.uniform(size=(count, 1)) ** (1.0 / m))


def lipschitz_estimate(spec, cutoff: CutoffPhi, samples: int = 2000, seed: int = 0, z0=None) -> LipschitzEstimate:
    """Estimate L_r for the truncated nonlinearity around the zero ``z0`` of f.

    Two sampled quantities, both in the sup norm, are combined by maximum:
    difference quotients of pairs inside the ball |v| <= r (where the
    cutoff is 1), and the growth ratio |Phi_r(v) f(z0 + v)| / |v| over the
    ball |v| <= 2r outside of which the truncated nonlinearity vanishes.
    """
    m = spec.m
    z = np.zeros(m) if z0 is None else np.asarray(z0, float)
    rng = np.random.default_rng(seed)
    r = cutoff.r

    def ftil(v):  # v has shape (count, m)
        pts = (v + z).T
        return (cutoff(v.T) * spec(pts)).T

    v = _ball(rng, m, r, samples)
    w = _ball(rng, m, r, samples)
    near = v + 1e-6 * r * _ball(rng, m, 1.0, samples)
    pa = np.vstack([v, v])
    pb = np.vstack([w, near])
    num = np.max(np.abs(ftil(pa) - ftil(pb)), axis=1)
    den = np.max(np.abs(pa - pb), axis=1)
    ok = den > 0
    pair = float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0

    g = _ball(rng, m, 2 * r, samples)
    gnum = np.max(np.abs(ftil(g)), axis=1)
    gden = np.max(np.abs(g), axis=1)
    ok = gden > 0
    growth = float(np.max(gnum[ok] / gden[ok])) if np.any(ok) else 0.0
    return LipschitzEstimate(max(pair, growth), 3 * samples, pair, growth)


def lipschitz_on_box(spec, upper, samples: int = 4000, seed: int = 0, lower=0.0) -> float:
    """Sampled Euclidean Lipschitz constant of f on the box [lower, upper]^m."""
    rng = np.random.default_rng(seed)
    m = spec.m
    lo = np.broadcast_to(np.asarray(lower, float), (m,))
    hi = np.broadcast_to(np.asarray(upper, float), (m,))
    a = rng.uniform(lo, hi, size=(samples, m))
    b = rng.uniform(lo, hi, size=(samples, m))
    step = 1e-6 * (hi - lo) * rng.standard_normal((samples, m))
    c = np.clip(a + step, lo, hi)
    pa, pb = np.vstack([a, a]), np.vstack([b, c])
    num = np.linalg.norm(spec(pa.T) - spec(pb.T), axis=0)
    den = np.linalg.norm(pa - pb, axis=1)
    ok = den > 0
    return float(np.max(num[ok] / den[ok]))


# ---------------------------------------------------------------------------
# Configuration and trajectories


def as_nonlinearity(obj):
    if isinstance(obj, ReactionNetwork):
        return MassAction(obj)
    return obj


@dataclass
class SimConfig:
    """Everything needed to integrate one PDE trajectory.

    With ``rescale`` set the solver integrates v(x, t) = u(x, a t) with
    a = 1/d_min, i.e. diffusion a*d_i and reaction a*f.
    """

    nonlinearity: object
    diffusion: Sequence[float]
    grid: SpatialGrid
    initial: Union[np.ndarray, Callable[[SpatialGrid], np.ndarray]]
    dt: float
    t_end: float
    stride: int = 1
    truncation_radius: Optional[float] = None
    rescale: bool = False
    z0: Optional[Sequence[float]] = None
    equilibrium: Optional[Sequence[float]] = None
    store_fields: bool = True
    blowup_ceiling: float = 1e8
    positivity_tol: float = 1e-12
    max_halvings: int = 20

    def __post_init__(self):
        self.nonlinearity = as_nonlinearity(self.nonlinearity)
        self.diffusion = tuple(float(x) for x in self.diffusion)
        if len(self.diffusion) != self.nonlinearity.m:
            raise ValueError(f"need {self.nonlinearity.m} diffusion coefficients, got {len(self.diffusion)}")
        if any(not d > 0 for d in self.diffusion):
            raise ValueError("diffusion coefficients must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.truncation_radius is not None and not self.truncation_radius > 0:
            raise ValueError("truncation radius must be positive")

    @property
    def m(self) -> int:
        return self.nonlinearity.m

    @property
    def d_min(self) -> float:
        return min(self.diffusion)

    @property
    def d_max(self) -> float:
        return max(self.diffusion)

    @property
    def d_mid(self) -> float:
        return 0.5 * (self.d_max + self.d_min)

    @property
    def time_scale(self) -> float:
        return 1.0 / self.d_min if self.rescale else 1.0

    @property
    def effective_diffusion(self) -> tuple[float, ...]:
        a = self.time_scale
        return tuple(a * d for d in self.diffusion)

    @property
    def mass_action(self) -> bool:
        return is_mass_action(self.nonlinearity)

    def reaction(self):
        """The explicit right-hand side a * F(u) actually integrated."""
        f = self.nonlinearity
        if self.truncation_radius is not None:
            f = Truncated(f, CutoffPhi(self.truncation_radius), self.z0)
        a = self.time_scale
        if a == 1.0:
            return f
        return lambda u: a * f(u)

    def initial_values(self) -> np.ndarray:
        u0 = self.initial(self.grid) if callable(self.initial) else self.initial
        u0 = np.array(u0, float)
        if u0.shape == (self.m,):
            u0 = u0.reshape((self.m,) + (1,) * self.grid.n) * np.ones(self.grid.shape)
        if u0.shape != (self.m,) + self.grid.shape:
            raise ValueError(f"initial data has shape {u0.shape}, expected {(self.m,) + self.grid.shape}")
        return u0

    def echo(self) -> dict:
        return {
            "nonlinearity": getattr(self.nonlinearity, "name", type(self.nonlinearity).__name__),
            "species": list(species_names(self.nonlinearity)),
            "diffusion": list(self.diffusion),
            "grid": {"lengths": list(self.grid.lengths), "counts": list(self.grid.counts)},
            "dt": self.dt,
            "t_end": self.t_end,
            "stride": self.stride,
            "truncation_radius": self.truncation_radius,
            "rescale": self.rescale,
            "time_scale": self.time_scale,
            "z0": None if self.z0 is None else list(map(float, self.z0)),
            "equilibrium": None if self.equilibrium is None else list(map(float, self.equilibrium)),
        }


@dataclass
class Trajectory:
    """Sampled states and diagnostics of one run.

    ``fields`` has shape (samples, m, *grid.shape), or (samples, m) for ODE
    runs where ``grid`` is None.
    """

    times: np.ndarray
    species: tuple[str, ...]
    diagnostics: dict[str, np.ndarray]
    fields: Optional[np.ndarray] = None
    grid: Optional[SpatialGrid] = None
    blow_up: bool = False
    blow_up_time: Optional[float] = None
    steps: int = 0
    rejected_steps: int = 0
    config: Optional[SimConfig] = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.species)

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> FieldState:
        if self.fields is None or self.grid is None:
            raise ValueError("trajectory has no stored fields")
        return FieldState(self.grid, self.fields[k], float(self.times[k]))

    def csv_columns(self) -> list[str]:
        cols = ["t"]
        for s in self.species:
            cols += [f"{s}_L1", f"{s}_L2", f"{s}_Linf", f"{s}_avg"]
        cols.append("total_mass")
        if "entropy" in self.diagnostics:
            cols.append("entropy")
        return cols

    def table(self) -> np.ndarray:
        d = self.diagnostics
        parts = [self.times[:, None]]
        for i in range(self.m):
            parts.append(np.stack([d["L1"][:, i], d["L2"][:, i], d["Linf"][:, i], d["avg"][:, i]], axis=1))
        parts.append(d["total_mass"][:, None])
        if "entropy" in d:
            parts.append(d["entropy"][:, None])
        return np.hstack(parts)

    def write_diagnostics_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.csv_columns())
            for row in self.table():
                writer.writerow([repr(float(x)) for x in row])

    def summary(self) -> dict:
        d = self.diagnostics
        out = {
            "blow_up": self.blow_up,
            "blow_up_time": self.blow_up_time,
            "samples": len(self.times),
            "t_final": float(self.times[-1]) if len(self.times) else None,
            "steps": self.steps,
            "rejected_steps": self.rejected_steps,
        }
        if "Linf" in d and len(self.times):
            out["sup_Linf"] = dict(zip(self.species, map(float, d["Linf"].max(axis=0))))
            out["sup_L1"] = dict(zip(self.species, map(float, d["L1"].max(axis=0))))
        if self.config is not None:
            out["config"] = self.config.echo()
        return out

    def write(self, outdir, snapshots: Optional[Sequence[int]] = None) -> None:
        """Write diagnostics.csv, summary.json and fields_<k>.csv snapshots."""
        os.makedirs(outdir, exist_ok=True)
        self.write_diagnostics_csv(os.path.join(outdir, "diagnostics.csv"))
        with open(os.path.join(outdir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
        if self.fields is not None and self.grid is not None and len(self.times):
            if snapshots is None:
                snapshots = sorted({0, len(self.times) - 1})
            for k in snapshots:
                G.write_field_csv(os.path.join(outdir, f"fields_{k}.csv"), self.state(k), self.species)


# ---------------------------------------------------------------------------
# Time stepping


class _Stepper:
    def __init__(self, config: SimConfig):
        self.config = config
        self.rhs = config.reaction()
        self.d_eff = config.effective_diffusion
        self.check_positive = config.mass_action
        self.rejected = 0

    def advance(self, u: np.ndarray, dt: float, depth: int = 0) -> np.ndarray:
        cfg = self.config
        ustar = u + dt * self.rhs(u)
        new = np.empty_like(u)
        for i, d in enumerate(self.d_eff):
            new[i] = G.heat_solve_implicit(ustar[i], cfg.grid, d, dt)
        if not np.all(np.isfinite(new)):
            return new
        if self.check_positive and new.min() < -cfg.positivity_tol:
            if depth >= cfg.max_halvings:
                raise PositivityError(f"state stayed negative after {cfg.max_halvings} step halvings")
            self.rejected += 1
            half = self.advance(u, 0.5 * dt, depth + 1)
            return self.advance(half, 0.5 * dt, depth + 1)
        return new


def step_imex(state: FieldState, config: SimConfig) -> FieldState:
    """Advance ``state`` by ``config.dt`` with one (possibly subdivided) IMEX step."""
    if not np.all(np.isfinite(state.values)):
        raise ValueError("state is not finite")
    new = _Stepper(config).advance(state.values, config.dt)
    if not np.all(np.isfinite(new)):
        raise NumericalError("non-finite values after step (blow-up)")
    return FieldState(state.grid, new, state.t + config.dt)


def _diagnostics(u: np.ndarray, grid: SpatialGrid, config: SimConfig) -> dict[str, np.ndarray]:
    vol = grid.cell_volume
    a = np.abs(u)
    flat = u.reshape(u.shape[0], -1)
    L1 = a.reshape(u.shape[0], -1).sum(axis=1) * vol
    L2 = np.sqrt((a * a).reshape(u.shape[0], -1).sum(axis=1) * vol)
    Linf = a.reshape(u.shape[0], -1).max(axis=1)
    avg = flat.mean(axis=1)
    dev = flat - avg[:, None]
    rec = {
        "L1": L1,
        "L2": L2,
        "Linf": Linf,
        "avg": avg,
        "total_mass": L1.sum(),
        "sum_Linf": np.abs(flat.sum(axis=0)).max(),
        "dev_Linf": np.abs(dev).max(axis=1),
        "dev_L2sq": np.sum(dev * dev) * vol,
    }
    if config.equilibrium is not None:
        rec["entropy"] = relative_entropy_field(np.maximum(u, 0.0), grid, config.equilibrium)
    lyap = getattr(config.nonlinearity, "lyapunov", None)
    if lyap is not None:
        rec["lyapunov"] = lyap(u, grid)
    return rec


def simulate(config: SimConfig) -> Trajectory:
    """Integrate ``config`` from t = 0 to ``t_end``, sampling every ``stride`` steps.

    Non-finite values or a sup norm above ``blowup_ceiling`` stop the run
    with ``blow_up`` set. Step-halving failures raise :class:`PositivityError`.
    """
    grid = config.grid
    u = config.initial_values()
    nsteps = int(round(config.t_end / config.dt))
    if abs(nsteps * config.dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    stepper = _Stepper(config)

    times, recs, fields = [0.0], [_diagnostics(u, grid, config)], [u.copy()] if config.store_fields else None
    blow_up, blow_time = False, None
    steps = 0
    for k in range(1, nsteps + 1):
        u = stepper.advance(u, config.dt)
        steps = k
        t = k * config.dt
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > config.blowup_ceiling:
            blow_up, blow_time = True, t
            break
        if k % config.stride == 0 or k == nsteps:
            times.append(t)
            recs.append(_diagnostics(u, grid, config))
            if fields is not None:
                fields.append(u.copy())

    diag = {key: np.array([r[key] for r in recs]) for key in recs[0]}
    return Trajectory(
        times=np.array(times),
        species=species_names(config.nonlinearity),
        diagnostics=diag,
        fields=None if fields is None else np.array(fields),
        grid=grid,
        blow_up=blow_up,
        blow_up_time=blow_time,
        steps=steps,
        rejected_steps=stepper.rejected,
        config=config,
    )


def _rk4(f, v, dt):
    k1 = f(v)
    k2 = f(v + 0.5 * dt * k1)
    k3 = f(v + 0.5 * dt * k2)
    k4 = f(v + dt * k3)
    return v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_ode(
    spec,
    v0,
    dt: float,
    t_end: float,
    stride: int = 1,
    positivity_tol: float = 1e-12,
    max_halvings: int = 20,
    blowup_ceiling: float = 1e8,
) -> Trajectory:
    """Classical RK4 for dv/dt = f(v) with the same step-halving policy as :func:`simulate`."""
    spec = as_nonlinearity(spec)
    v = np.array(v0, float)
    if v.shape != (spec.m,):
        raise ValueError(f"v0 must have length {spec.m}")
    check = is_mass_action(spec)
    if check and np.any(v < 0):
        raise ValueError("mass-action initial state must be nonnegative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(t_end / dt))
    if abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    rejected = 0

    def advance(v, h, depth=0):
        nonlocal rejected
        new = _rk4(spec, v, h)
        if check and np.all(np.isfinite(new)) and new.min() < -positivity_tol:
            if depth >= max_halvings:
                raise PositivityError(f"state stayed negative after {max_halvings} step halvings")
            rejected += 1
            return advance(advance(v, 0.5 * h, depth + 1), 0.5 * h, depth + 1)
        return new

    times, states = [0.0], [v.copy()]
    blow_up, blow_time, steps = False, None, 0
    for k in range(1, nsteps + 1):
        v = advance(v, dt)
        steps = k
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > blowup_ceiling:
            blow_up, blow_time = True, k * dt
            break
        if k % stride == 0 or k == nsteps:
            times.append(k * dt)
            states.append(v.copy())
    states = np.array(states)
    mag = np.abs(states)
    diag = {"Linf": mag, "L1": mag, "L2": mag, "avg": states, "total_mass": mag.sum(axis=1)}
    return Trajectory(
        times=np.array(times),
        species=species_names(spec),
        diagnostics=diag,
        fields=states,
        grid=None,
        blow_up=blow_up,
        blow_up_time=blow_time,
        steps=steps,
        rejected_steps=rejected,
    )


def averaged_residual(trajectory: Trajectory, spec) -> np.ndarray:
    """g_i(t) = mean_x f_i(u(x, t)) - f_i(mean_x u(x, t)), shape (samples, m)."""
    if trajectory.fields is None or trajectory.grid is None:
        raise ValueError("averaged_residual needs a trajectory with stored fields")
    spec = as_nonlinearity(spec)
    F = trajectory.fields  # (S, m, *shape)
    S, m = F.shape[:2]
    flat = F.reshape(S, m, -1)
    fu = spec(np.moveaxis(flat, 1, 0))  # (m, S, nodes)
    mean_f = fu.mean(axis=2).T
    ubar = flat.mean(axis=2)
    f_bar = spec(ubar.T).T
    return mean_f - f_bar
