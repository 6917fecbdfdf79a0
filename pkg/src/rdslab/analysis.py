"""Exponent schedules, closed-form bounds and decay fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats


@dataclass
class Inequality:
    """One evaluated inequality instance ``lhs <relation> rhs``."""

    label: str
    lhs: float
    rhs: float
    relation: str
    holds: bool

    @classmethod
    def check(cls, label: str, lhs: float, relation: str, rhs: float) -> "Inequality":
        ops = {
            "<": lambda a, b: a < b,
            "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b,
            ">=": lambda a, b: a >= b,
        }
        return cls(label, float(lhs), float(rhs), relation, bool(ops[relation](lhs, rhs)))

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Exponent schedules


@dataclass
class BootstrapSchedule:
    n: int
    mu: float
    q_list: list[float]
    K: int
    p_list: list[float]
    k0: int
    threshold: float

    @property
    def J(self) -> int:
        return self.K + 1

    @property
    def L(self) -> int:
        return self.K + 2

    @property
    def q_conjugates(self) -> list[float]:
        return [q / (q - 1.0) for q in self.q_list]


def q_exponent(n: int, k: int) -> float:
    return ((n + 2) / (n + 1)) ** k


def bootstrap_schedule(n: int, mu: float, p0: Optional[float] = None) -> BootstrapSchedule:
    """Integrability exponents used to lift L^p bounds to L^infinity.

    K is the smallest k >= 0 with q_k = ((n+2)/(n+1))^k above (mu-1)(n+2)/2;
    the p-recursion p_{k+1} = (n+2)(p_k/mu) / (n+2 - 2 p_k/mu) starts from
    ``p0`` (default q_K) and stops at the first k0 with p_k0/mu > (n+2)/2.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if mu < 1:
        raise ValueError("growth exponent must be >= 1")
    threshold = (mu - 1.0) * (n + 2) / 2.0
    K = 0
    while not q_exponent(n, K) > threshold:
        K += 1
    q_list = [q_exponent(n, k) for k in range(1, K + 1)]
    if p0 is None:
        p0 = q_exponent(n, K)
    if not p0 > threshold:
        raise ValueError(f"p0={p0} must exceed (mu-1)(n+2)/2={threshold}")
    p_list = [float(p0)]
    while not p_list[-1] / mu > (n + 2) / 2.0:
        x = p_list[-1] / mu
        den = n + 2 - 2.0 * x
        p_list.append((n + 2) * x / den if den > 0 else math.inf)
        if len(p_list) > 10_000:
            raise RuntimeError("p-recursion did not terminate")
    return BootstrapSchedule(n, float(mu), q_list, K, p_list, len(p_list) - 1, threshold)


def schedule_inequalities(schedule: BootstrapSchedule) -> list[Inequality]:
    """Numerical checks of the relations a generated schedule must satisfy."""
    n, mu, p0 = schedule.n, schedule.mu, schedule.p_list[0]
    out = []
    qs = [q_exponent(n, k) for k in range(0, schedule.K + 1)]
    if schedule.K >= 1:
        out.append(Inequality.check("q_K > threshold", qs[-1], ">", schedule.threshold))
        out.append(Inequality.check("q_{K-1} <= threshold", qs[-2], "<=", schedule.threshold))
    for a, b in zip(schedule.q_list, schedule.q_list[1:]):
        out.append(Inequality.check("q increasing", b, ">", a))
    den0 = mu * (n + 2) - 2 * p0
    # with den0 <= 0 the recursion jumps straight to infinity and there is no finite floor
    ratio_floor = (n + 2) / den0 if den0 > 0 else 0.0
    # roundoff slack for the floor, scaled by the cancellation in den0
    slack = 1e-14 * mu * (n + 2) / den0 if den0 > 0 else 0.0
    for k, (a, b) in enumerate(zip(schedule.p_list, schedule.p_list[1:])):
        out.append(Inequality.check(f"p_{k + 1} > p_{k}", b, ">", a))
        if math.isfinite(b):
            # equality at k = 0 since the ratio depends on p_k and p_k = p0 there
            out.append(Inequality.check(f"p_{k + 1}/p_{k} >= ratio floor", b / a, ">=", ratio_floor * (1 - slack)))
    for k, p in enumerate(schedule.p_list):
        rel = ">" if k == schedule.k0 else "<="
        out.append(Inequality.check(f"p_{k}/mu vs (n+2)/2", p / mu, rel, (n + 2) / 2.0))
    for k in range(1, schedule.K):
        qt_k, qt_k1 = schedule.q_conjugates[k - 1], schedule.q_conjugates[k]
        den = n + 2 - 2 * qt_k1
        rhs = (n + 2) * qt_k1 / den if den > 0 else math.inf
        out.append(Inequality.check(f"conjugate exponent gap k={k}", qt_k, "<", rhs))
    for k in range(1, max(schedule.K, 1) + 1):
        out.append(Inequality.check(f"(n+1)^k < 2(n+2)^k k={k}", (n + 1) ** k, "<", 2 * (n + 2) ** k))
    return out


def large_diffusion_K(n: int) -> tuple[int, int]:
    """Smallest K >= 0 with 2((n+2)/n)^K > (n+2)/2, together with L = K + 2."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    K = 0
    while not 2.0 * ((n + 2) / n) ** K > (n + 2) / 2.0:
        K += 1
    return K, K + 2


# ---------------------------------------------------------------------------
# Condition checks and bounds


@dataclass
class RegimeReport:
    name: str
    checks: list[Inequality] = field(default_factory=list)
    values: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "values": self.values,
            "notes": self.notes,
        }


def quasi_uniform_condition(
    d_vec: Sequence[float],
    n: int,
    mu: float,
    C_provider: Callable[[float, float], float],
) -> RegimeReport:
    """Evaluate (d_max - d_min)/2 * C_{d, q~_k} < 1 for k = 1..K."""
    d_vec = [float(x) for x in d_vec]
    d_max, d_min = max(d_vec), min(d_vec)
    d = 0.5 * (d_max + d_min)
    sched = bootstrap_schedule(n, mu)
    rep = RegimeReport("quasi-uniform", values={"d_max": d_max, "d_min": d_min, "d": d, "K": sched.K})
    if sched.K == 0:
        rep.notes.append("K = 0: condition is vacuous")
    for k, (q, qt) in enumerate(zip(sched.q_list, sched.q_conjugates), start=1):
        C = float(C_provider(d, qt))
        rep.checks.append(Inequality.check(f"k={k} q={q:.6g} q~={qt:.6g} C={C:.6g}", 0.5 * (d_max - d_min) * C, "<", 1.0))
    return rep


def young_bound(A: float, eps: float) -> float:
    """Bound on X >= 0 implied by X <= A X^eps with eps in (0, 1)."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if A < 0:
        raise ValueError("A must be nonnegative")
    return 2.0 * (1.0 - eps) * (2.0 * eps) ** (eps / (1.0 - eps)) * A ** (1.0 / (1.0 - eps))


def gronwall_ceiling(M: float, a: float, L_r: float, K: int) -> float:
    """M exp(a L_r (K + 1))."""
    if min(M, a, L_r, K) < 0:
        raise ValueError("arguments must be nonnegative")
    return M * math.exp(a * L_r * (K + 1))


@dataclass
class BMBound:
    value: float
    embedding_branch: float
    gronwall_branch: float
    C_embed: float
    C_embed_source: str = "user-supplied"


def b_m_bound(M: float, L_M: float, eps_K1: float, C_embed: float, K: int = 0) -> BMBound:
    """max{C 3^(1/(1-eps)) L_M^(1/(2(1-eps))), e^(K+1) M} with a user-supplied embedding constant C."""
    if not 0 < eps_K1 < 1:
        raise ValueError("eps_K1 must lie in (0, 1)")
    e = 1.0 - eps_K1
    first = C_embed * 3.0 ** (1.0 / e) * L_M ** (1.0 / (2.0 * e))
    second = math.exp(K + 1) * M
    return BMBound(max(first, second), first, second, C_embed)


def poincare_gap(d_min: float, C_Omega: float, C_M: float) -> float:
    """delta = 2 d_min C_Omega - C_M; positive means the averages attract."""
    if min(d_min, C_Omega, C_M) < 0:
        raise ValueError("arguments must be nonnegative")
    return 2.0 * d_min * C_Omega - C_M


# ---------------------------------------------------------------------------
# Fits and trajectory reports


@dataclass
class DecayFit:
    C: float
    lam: float
    r2: float
    window: tuple[float, float]
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


FLOOR = 1e-14


def fit_exponential(t, y, window: Optional[tuple[float, float]] = None, floor: float = FLOOR) -> DecayFit:
    """Least-squares line through (t, log y): y ~ C exp(-lam t).

    Samples outside ``window`` or with y below ``floor`` are dropped.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    mask = np.isfinite(y) & (y > floor)
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if mask.sum() < 5:
        raise ValueError(f"need at least 5 usable samples, got {int(mask.sum())}")
    tt, ly = t[mask], np.log(y[mask])
    res = stats.linregress(tt, ly)
    resid = ly - (res.intercept + res.slope * tt)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - np.sum(resid**2) / ss_tot)
    win = window if window is not None else (float(tt[0]), float(tt[-1]))
    return DecayFit(float(np.exp(res.intercept)), float(-res.slope), float(r2), tuple(win), int(mask.sum()))


def tail_ratio(t, y) -> float:
    """sup of y over the last third of [t0, t1] divided by its sup over the middle third."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    t0, t1 = t[0], t[-1]
    a, b = t0 + (t1 - t0) / 3.0, t0 + 2.0 * (t1 - t0) / 3.0
    mid = y[(t >= a) & (t <= b)]
    last = y[t >= b]
    if mid.size == 0 or last.size == 0:
        raise ValueError("too few samples to split into thirds")
    top = np.max(mid)
    if top == 0:
        return 1.0 if np.max(last) == 0 else math.inf
    return float(np.max(last) / top)


@dataclass
class UniformBoundReport:
    global_solution: bool
    sup_Linf: dict
    sup_L1: dict
    tail_ratio: float
    tail_ratios: dict
    mass_nonincreasing: bool
    mass_max_increase: float
    bounded: bool

    def as_dict(self) -> dict:
        return asdict(self)


def uniform_bound_report(trajectory, tail_tol: float = 1.05, mass_tol: float = 1e-10) -> UniformBoundReport:
    """Sup-in-time norms plus a tail-flatness verdict."""
    d = trajectory.diagnostics
    names = trajectory.species
    t = trajectory.times
    Linf, L1 = d["Linf"], d["L1"]
    ratios = {s: tail_ratio(t, Linf[:, i]) for i, s in enumerate(names)}
    overall = tail_ratio(t, Linf.max(axis=1))
    mass = d["total_mass"]
    inc = float(np.max(np.diff(mass))) if len(mass) > 1 else 0.0
    glob = not trajectory.blow_up
    return UniformBoundReport(
        global_solution=glob,
        sup_Linf={s: float(Linf[:, i].max()) for i, s in enumerate(names)},
        sup_L1={s: float(L1[:, i].max()) for i, s in enumerate(names)},
        tail_ratio=overall,
        tail_ratios=ratios,
        mass_nonincreasing=inc <= mass_tol,
        mass_max_increase=inc,
        bounded=glob and overall <= tail_tol,
    )


def max_increase(series) -> float:
    """Largest one-sample increase of a series (<= 0 for nonincreasing series)."""
    s = np.asarray(series, float)
    return float(np.max(np.diff(s))) if s.size > 1 else -math.inf
