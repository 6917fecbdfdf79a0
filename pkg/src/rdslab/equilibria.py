"""Equilibria of mass-action networks and relative entropies."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import orth
from scipy.optimize import linprog
from scipy.special import xlogy

from .grid import SpatialGrid
from .network import MassAction, ReactionNetwork, check_complex_balance, conservation_laws


class EquilibriumError(RuntimeError):
    pass


class EquilibriumKind(enum.Enum):
    POSITIVE = "positive"
    BOUNDARY = "boundary"


@dataclass
class EquilibriumSolution:
    u_inf: np.ndarray
    masses: np.ndarray
    kind: EquilibriumKind
    iterations: int = 0

    def as_dict(self) -> dict:
        return {"u_inf": self.u_inf.tolist(), "masses": self.masses.tolist(), "kind": self.kind.value}


def _network(obj) -> ReactionNetwork:
    return obj.network if isinstance(obj, MassAction) else obj


def _entropy_terms(u, u_inf):
    u = np.asarray(u, float)
    u_inf = np.asarray(u_inf, float)
    if np.any(u_inf <= 0):
        raise ValueError("reference state must be componentwise positive")
    if np.any(u < 0):
        raise ValueError("entropy is defined for nonnegative states")
    return xlogy(u, u / u_inf) - u + u_inf


def relative_entropy_vector(u, u_inf) -> float:
    """E[u|u_inf] = sum_i u_i log(u_i/u_inf_i) - u_i + u_inf_i, with 0 log 0 = 0."""
    return float(np.sum(_entropy_terms(u, u_inf)))


def relative_entropy_field(values, grid: SpatialGrid, u_inf) -> float:
    """Midpoint quadrature of the entropy density over the box.

    ``values`` has shape (m, *grid.shape).
    """
    values = np.asarray(values, float)
    u_inf = np.asarray(u_inf, float)
    ref = u_inf.reshape((-1,) + (1,) * grid.n)
    return float(np.sum(_entropy_terms(values, ref)) * grid.cell_volume)


def _class_masses(network: ReactionNetwork, u0: np.ndarray) -> np.ndarray:
    return conservation_laws(network) @ u0


def _feasible_interval(u0: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Largest [lo, hi] with u0 + s v >= 0."""
    lo, hi = -np.inf, np.inf
    for ui, vi in zip(u0, v):
        if vi > 0:
            lo = max(lo, -ui / vi)
        elif vi < 0:
            hi = min(hi, -ui / vi)
        elif ui < 0:
            return np.inf, -np.inf
    return lo, hi


def _log_flow_gap(fwd, bwd, u):
    """log(kf u^alpha) - log(kb u^beta); +-inf where one flow vanishes."""
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    a, b = np.asarray(fwd.alpha), np.asarray(bwd.alpha)
    lf = np.log(fwd.k) + np.sum(a[a > 0] * logu[a > 0])
    lb = np.log(bwd.k) + np.sum(b[b > 0] * logu[b > 0])
    if np.isneginf(lf) and np.isneginf(lb):
        return np.nan
    return lf - lb


def solve_single_reversible_equilibrium(network: ReactionNetwork, u0, tol: float = 1e-15) -> EquilibriumSolution:
    """Positive equilibrium of a single reversible pair in the class of ``u0``.

    Bisects the log-flow difference along u(s) = u0 + s (beta - alpha).
    """
    network = _network(network)
    pair = network.reversible_pair()
    if pair is None:
        raise ValueError("network is not a single reversible pair")
    fwd, bwd = pair
    u0 = np.asarray(u0, float)
    v = fwd.vector
    lo, hi = _feasible_interval(u0, v)
    if not lo < hi:
        raise EquilibriumError("degenerate compatibility class: no interior point")
    # the gap is strictly decreasing in s on the interior
    def gap(s):
        return _log_flow_gap(fwd, bwd, u0 + s * v)

    # one end is infinite when every species moves the same way; expand it
    a, b = lo, hi
    step = 1.0
    while not np.isfinite(b):
        if gap(a + step) < 0:
            b = a + step
        step *= 2.0
        if step > 1e300:
            raise EquilibriumError("no sign change of the flow difference")
    while not np.isfinite(a):
        if gap(b - step) > 0:
            a = b - step
        step *= 2.0
        if step > 1e300:
            raise EquilibriumError("no sign change of the flow difference")
    ga, gb = gap(a), gap(b)
    if not (ga > 0 or np.isnan(ga)) or not (gb < 0 or np.isnan(gb)):
        raise EquilibriumError("no sign change of the flow difference on the feasible interval")
    iters = 0
    for iters in range(1, 400):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        g = gap(mid)
        if g == 0:
            a = b = mid
            break
        if g > 0:
            a = mid
        else:
            b = mid
        if b - a <= tol * max(1.0, abs(mid)):
            break
    s = 0.5 * (a + b)
    u = u0 + s * v
    if np.min(u) <= 0:
        raise EquilibriumError("bisection converged to the boundary of the class")
    return EquilibriumSolution(u, _class_masses(network, u0), EquilibriumKind.POSITIVE, iters)


def find_boundary_equilibria_single(network: ReactionNetwork, u0, atol: float = 0.0) -> list[EquilibriumSolution]:
    """Endpoints of the class segment where both forward and backward flows vanish."""
    network = _network(network)
    pair = network.reversible_pair()
    if pair is None:
        raise ValueError("network is not a single reversible pair")
    u0 = np.asarray(u0, float)
    v = pair[0].vector
    lo, hi = _feasible_interval(u0, v)
    if lo > hi:
        return []
    masses = _class_masses(network, u0)
    ma = MassAction(network)
    out = []
    for s in dict.fromkeys(x for x in (lo, hi) if np.isfinite(x)):
        u = np.maximum(u0 + s * v, 0.0)
        # snap the species that define this endpoint exactly to zero
        u[np.abs(u) < 1e-14 * max(1.0, np.max(np.abs(u0)))] = 0.0
        if np.all(np.abs(ma.flows(u)) <= atol):
            out.append(EquilibriumSolution(u, masses, EquilibriumKind.BOUNDARY))
    return out


def find_balanced_reference(network: ReactionNetwork, grid=None) -> Optional[np.ndarray]:
    """Search t (1, ..., 1) over t in a log grid for a complex-balanced state."""
    network = _network(network)
    ts = np.logspace(-3, 3, 61) if grid is None else grid
    for t in ts:
        c = np.full(network.m, float(t))
        if check_complex_balance(network, c).balanced:
            return c
    return None


def _interior_point(u0: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Point of the class maximizing its smallest coordinate."""
    m, k = V.shape
    cap = max(1.0, float(np.max(u0)))
    # variables (y, t): maximize t subject to u0 + V y >= t
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A = np.hstack([-V, np.ones((m, 1))])
    res = linprog(c, A_ub=A, b_ub=u0, bounds=[(None, None)] * k + [(None, cap)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise EquilibriumError("compatibility class has no positive point")
    return res.x[:k]


def _polish(u: np.ndarray, u0: np.ndarray, c: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Refine u = c exp(W^T lam) against the class masses W u = W u0.

    Components far below the class masses lose relative accuracy in the
    affine coordinates u0 + V y; in these coordinates they keep it.
    """
    if W.shape[0] == 0:
        return c.copy()
    target = W @ u0
    scale = np.abs(W) @ u0
    lam = np.linalg.lstsq(W.T, np.log(u / c), rcond=None)[0]
    for _ in range(50):
        v = c * np.exp(W.T @ lam)
        r = W @ v - target
        if np.all(np.abs(r) <= 4e-16 * scale):
            return v
        dlam = np.linalg.solve((W * v) @ W.T, r)
        lam -= dlam
        if np.linalg.norm(dlam, np.inf) <= 1e-15:
            break
    return c * np.exp(W.T @ lam)


def solve_complex_balanced_equilibrium(
    network: ReactionNetwork,
    u0_avg,
    reference=None,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> EquilibriumSolution:
    """Complex-balanced equilibrium in the class of ``u0_avg``.

    Minimizes sum_i u_i log(u_i/c_i) - u_i over the compatibility class by
    damped Newton, where c is a complex-balanced positive state (searched
    along the diagonal when ``reference`` is not given; single reversible
    pairs fall back to the bisection solver).
    """
    network = _network(network)
    u0 = np.asarray(u0_avg, float)
    if u0.shape != (network.m,):
        raise ValueError("u0_avg has the wrong length")
    if np.any(u0 < 0):
        raise ValueError("u0_avg must be nonnegative")
    if reference is None:
        reference = find_balanced_reference(network)
        if reference is None:
            if network.reversible_pair() is None:
                raise EquilibriumError("no complex-balanced reference state found")
            reference = solve_single_reversible_equilibrium(network, u0).u_inf
    c = np.asarray(reference, float)

    S = network.stoichiometric_matrix
    V = orth(S) if np.any(S) else np.zeros((network.m, 0))
    k = V.shape[1]
    masses = _class_masses(network, u0)
    logc = np.log(c)

    # start from the point of the class farthest from the boundary
    y = np.zeros(0) if k == 0 else _interior_point(u0, V)

    def objective(y):
        u = u0 + V @ y
        if np.any(u <= 0):
            return np.inf
        return float(np.sum(u * (np.log(u) - logc) - u))

    it = 0
    for it in range(1, max_iter + 1):
        if k == 0:
            break
        u = u0 + V @ y
        g = V.T @ (np.log(u) - logc)
        H = V.T @ (V / u[:, None])
        step = -np.linalg.solve(H, g)
        decrement = float(-(g @ step))
        du = np.linalg.norm(V @ step, np.inf)
        lam = 1.0
        if decrement > 1e-8 * (1.0 + np.sum(u)):
            # damped phase: Armijo backtracking on the entropy
            f0 = objective(y)
            while objective(y + lam * step) > f0 - 1e-4 * lam * decrement:
                lam *= 0.5
                if lam < 1e-12:
                    raise EquilibriumError("line search failed")
        else:
            # quadratic phase: objective differences are at roundoff level,
            # so only keep the iterate positive
            while np.any(u0 + V @ (y + lam * step) <= 0):
                lam *= 0.5
        y = y + lam * step
        # quadratic convergence: after a full step this small the error is O(du^2)
        if lam == 1.0 and du <= 1e-9 * np.linalg.norm(u, np.inf):
            break
    else:
        raise EquilibriumError(f"Newton did not converge in {max_iter} iterations")

    u_inf = _polish(u0 + V @ y, u0, c, conservation_laws(network))
    ma = MassAction(network)
    flows = ma.flows(u_inf)
    if np.max(np.abs(ma(u_inf))) > tol * (1.0 + np.max(np.abs(flows))):
        raise EquilibriumError("candidate is not an equilibrium")
    report = check_complex_balance(network, u_inf, rtol=tol)
    if not report.balanced:
        raise EquilibriumError("complex balance fails at the candidate")
    return EquilibriumSolution(u_inf, masses, EquilibriumKind.POSITIVE, it)
