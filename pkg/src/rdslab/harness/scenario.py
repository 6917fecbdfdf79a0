"""Scenario files: TOML descriptions of one simulation plus the checks to run on it."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..grid import SpatialGrid
from ..network import MassAction, NetworkSyntaxError, builtin, load_network, parse_network
from ..solver import CutoffPhi, SimConfig, lipschitz_estimate


class ConfigError(ValueError):
    """Invalid scenario; reported before any computation."""


SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenarios")

_SECTIONS = {
    "name": None,
    "description": None,
    "checks": None,
    "network": {"dsl", "file", "builtin"},
    "grid": {"lengths", "counts"},
    "diffusion": {"d", "schedule", "scale_by_lipschitz"},
    "initial": {"kind", "values", "base", "amplitude", "centers", "width", "mean", "lo", "hi", "seed"},
    "time": {"dt", "t_end", "stride"},
    "equilibrium": {"request", "value"},
    "options": {"truncation_radius", "z0", "rescale", "expect_blowup", "store_fields", "blowup_ceiling"},
    "params": None,
}


@dataclass
class Scenario:
    """A parsed scenario. ``raw`` keeps the TOML tables for reruns with modifications."""

    name: str
    raw: dict
    base_dir: str = "."
    checks: list[str] = field(default_factory=list)

    @property
    def params(self) -> dict:
        return self.raw.get("params", {})

    def option(self, key: str, default=None):
        return self.raw.get("options", {}).get(key, default)

    def modified(self, **tables) -> "Scenario":
        """Copy with top-level tables updated key by key (``None`` deletes a key)."""
        raw = copy.deepcopy(self.raw)
        for table, updates in tables.items():
            if isinstance(updates, dict):
                tgt = raw.setdefault(table, {})
                for k, v in updates.items():
                    if v is None:
                        tgt.pop(k, None)
                    else:
                        tgt[k] = v
            else:
                raw[table] = updates
        return Scenario(raw.get("name", self.name), raw, self.base_dir, list(raw.get("checks", [])))


def _validate(raw: dict) -> None:
    for key, value in raw.items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown top-level key {key!r}")
        allowed = _SECTIONS[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            extra = set(value) - allowed
            if extra:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(extra)}")
    for key in ("name", "network", "grid", "diffusion", "initial", "time"):
        if key not in raw:
            raise ConfigError(f"missing required entry {key!r}")
    net = raw["network"]
    if sum(k in net for k in ("dsl", "file", "builtin")) != 1:
        raise ConfigError("[network] needs exactly one of dsl, file, builtin")
    init = raw["initial"]
    kind = init.get("kind")
    if kind not in ("constant", "bumps", "random"):
        raise ConfigError(f"[initial] kind must be constant, bumps or random, got {kind!r}")
    if kind == "random" and "seed" not in init:
        raise ConfigError("random initial data needs an explicit seed")
    if "d" not in raw["diffusion"] and "schedule" not in raw["diffusion"]:
        raise ConfigError("[diffusion] needs d or schedule")


def scenario_from_dict(raw: dict, base_dir: str = ".") -> Scenario:
    from .checks import CHECKS

    _validate(raw)
    checks = list(raw.get("checks", []))
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s) {unknown}; known: {sorted(CHECKS)}")
    return Scenario(str(raw["name"]), raw, base_dir, checks)


def load_scenario(path: str) -> Scenario:
    """Read a scenario TOML file, or a shipped scenario by name."""
    if not os.path.exists(path):
        shipped = os.path.join(SCENARIO_DIR, f"{path}.toml")
        if os.path.exists(shipped):
            path = shipped
        else:
            raise ConfigError(f"scenario file {path!r} not found")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, os.path.dirname(os.path.abspath(path)))


def shipped_scenarios() -> list[str]:
    return sorted(f[:-5] for f in os.listdir(SCENARIO_DIR) if f.endswith(".toml"))


# ---------------------------------------------------------------------------
# Building solver inputs


def build_nonlinearity(scenario: Scenario):
    net = scenario.raw["network"]
    try:
        if "dsl" in net:
            return MassAction(parse_network(net["dsl"]))
        if "file" in net:
            path = net["file"]
            if not os.path.isabs(path):
                path = os.path.join(scenario.base_dir, path)
            return MassAction(load_network(path))
        return builtin(net["builtin"])
    except (NetworkSyntaxError, KeyError, OSError) as exc:
        raise ConfigError(f"network: {exc}") from None


def build_grid(scenario: Scenario) -> SpatialGrid:
    g = scenario.raw["grid"]
    try:
        return SpatialGrid(tuple(g["lengths"]), tuple(g["counts"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from None


def _vec(value, m: int, what: str) -> np.ndarray:
    arr = np.asarray(value, float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise ConfigError(f"{what} needs {m} entries, got {arr.shape}")
    return arr


def initial_data(spec: dict, grid: SpatialGrid, m: int, seed_override: Optional[int] = None) -> np.ndarray:
    """Evaluate an [initial] table on ``grid``; returns shape (m, *grid.shape)."""
    kind = spec["kind"]
    if kind == "constant":
        vals = _vec(spec["values"], m, "initial.values")
        return vals.reshape((m,) + (1,) * grid.n) * np.ones((m,) + grid.shape)
    if kind == "random":
        seed = spec["seed"] if seed_override is None else seed_override
        rng = np.random.default_rng(seed)
        lo = _vec(spec.get("lo", 0.0), m, "initial.lo")
        hi = _vec(spec.get("hi", 1.0), m, "initial.hi")
        out = rng.uniform(size=(m,) + grid.shape)
        return lo.reshape((m,) + (1,) * grid.n) + (hi - lo).reshape((m,) + (1,) * grid.n) * out
    # gaussian bumps
    base = _vec(spec.get("base", 0.0), m, "initial.base")
    amp = _vec(spec.get("amplitude", 1.0), m, "initial.amplitude")
    width = float(spec.get("width", 0.1))
    centers = spec.get("centers")
    if centers is None:
        centers = [[L / 2 for L in grid.lengths]] * m
    if len(centers) != m:
        raise ConfigError(f"initial.centers needs {m} entries")
    x = grid.coordinates()
    out = np.empty((m,) + grid.shape)
    for i in range(m):
        c = np.atleast_1d(np.asarray(centers[i], float))
        if c.shape != (grid.n,):
            raise ConfigError(f"initial.centers[{i}] must have {grid.n} coordinates")
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, c))
        out[i] = base[i] + amp[i] * np.exp(-r2 / (2 * width**2))
    if "mean" in spec:
        target = _vec(spec["mean"], m, "initial.mean")
        avg = out.reshape(m, -1).mean(axis=1)
        if np.any((avg == 0) & (target != 0)):
            raise ConfigError("cannot rescale a zero field to a nonzero mean")
        scale = np.divide(target, avg, out=np.zeros(m), where=avg != 0)
        out *= scale.reshape((m,) + (1,) * grid.n)
    return out


def diffusion_vectors(scenario: Scenario, m: int) -> list[np.ndarray]:
    d = scenario.raw["diffusion"]
    if "schedule" in d:
        return [_vec(v, m, "diffusion.schedule entry") for v in d["schedule"]]
    return [_vec(d["d"], m, "diffusion.d")]


def build_config(
    scenario: Scenario,
    diffusion=None,
    seed_override: Optional[int] = None,
    **overrides: Any,
) -> SimConfig:
    """Turn a scenario into a :class:`SimConfig` (first schedule entry unless ``diffusion`` given)."""
    f = build_nonlinearity(scenario)
    grid = build_grid(scenario)
    m = f.m
    d = np.asarray(diffusion, float) if diffusion is not None else diffusion_vectors(scenario, m)[0]
    opts = scenario.raw.get("options", {})
    r = opts.get("truncation_radius")
    z0 = opts.get("z0")
    if z0 is not None:
        z0 = _vec(z0, m, "options.z0")
    if scenario.raw["diffusion"].get("scale_by_lipschitz"):
        if r is None:
            raise ConfigError("scale_by_lipschitz needs options.truncation_radius")
        L = lipschitz_estimate(f, CutoffPhi(r), seed=0 if seed_override is None else seed_override, z0=z0)
        d = d * L.value
    t = scenario.raw["time"]
    eq = scenario.raw.get("equilibrium", {})
    u0 = initial_data(scenario.raw["initial"], grid, m, seed_override)
    equilibrium = None
    if "value" in eq:
        equilibrium = _vec(eq["value"], m, "equilibrium.value")
    elif eq.get("request"):
        if not isinstance(f, MassAction):
            raise ConfigError("equilibrium requests need a mass-action network")
        from ..equilibria import solve_complex_balanced_equilibrium

        equilibrium = solve_complex_balanced_equilibrium(f.network, u0.reshape(m, -1).mean(axis=1)).u_inf
    kwargs = dict(
        nonlinearity=f,
        diffusion=tuple(d),
        grid=grid,
        initial=u0,
        dt=float(t["dt"]),
        t_end=float(t["t_end"]),
        stride=int(t.get("stride", 1)),
        truncation_radius=r,
        rescale=bool(opts.get("rescale", False)),
        z0=z0,
        equilibrium=equilibrium,
        store_fields=bool(opts.get("store_fields", True)),
        blowup_ceiling=float(opts.get("blowup_ceiling", 1e8)),
    )
    kwargs.update(overrides)
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
