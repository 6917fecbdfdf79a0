"""Cell-centered finite differences on Neumann boxes in one or two dimensions."""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SolverError(RuntimeError):
    """A linear solve failed to reach its residual tolerance."""


@dataclass(frozen=True)
class SpatialGrid:
    """Box [0, L_1] x ... x [0, L_n] split into N_1 x ... x N_n cells.

    Nodes sit at cell centers x_j = (j + 1/2) h with h = L / N.
    """

    lengths: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(x) for x in np.atleast_1d(self.lengths)))
        object.__setattr__(self, "counts", tuple(int(x) for x in np.atleast_1d(self.counts)))
        if len(self.lengths) != len(self.counts):
            raise ValueError("lengths and counts must have the same dimension")
        if self.n not in (1, 2):
            raise ValueError(f"only 1D and 2D grids are supported, got n={self.n}")
        if any(N < 4 for N in self.counts):
            raise ValueError("need at least 4 nodes per axis")
        if any(not L > 0 for L in self.lengths):
            raise ValueError("box lengths must be positive")

    @classmethod
    def interval(cls, N: int, L: float = 1.0) -> "SpatialGrid":
        return cls((L,), (N,))

    @classmethod
    def square(cls, N: int, L: float = 1.0) -> "SpatialGrid":
        return cls((L, L), (N, N))

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.lengths, self.counts))

    @property
    def h(self) -> float:
        """Spacing of the first axis (all axes for uniform grids)."""
        return self.spacing[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axes(self) -> list[np.ndarray]:
        return [(np.arange(N) + 0.5) * h for N, h in zip(self.counts, self.spacing)]

    def coordinates(self) -> list[np.ndarray]:
        """Node coordinate arrays, each of shape ``self.shape``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def zeros(self, m: Optional[int] = None) -> np.ndarray:
        return np.zeros(self.shape if m is None else (m,) + self.shape)


@dataclass
class FieldState:
    """Concentrations of all species on a grid at time ``t``; values has shape (m, *grid.shape)."""

    grid: SpatialGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape[1:]} does not match grid {self.grid.shape}")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def averages(self) -> np.ndarray:
        return np.array([spatial_average(v, self.grid) for v in self.values])

    def total(self) -> np.ndarray:
        """The pointwise sum z = sum_i u_i."""
        return self.values.sum(axis=0)


def _check_shape(u: np.ndarray, grid: SpatialGrid) -> None:
    if u.shape[u.ndim - grid.n :] != grid.shape:
        raise ValueError(f"array shape {u.shape} does not end with grid shape {grid.shape}")


def laplacian(u, grid: SpatialGrid) -> np.ndarray:
    """Second differences with reflected ghost nodes (zero Neumann flux).

    Acts on the trailing ``grid.n`` axes, so stacked species arrays work too.
    """
    u = np.asarray(u, float)
    _check_shape(u, grid)
    out = np.zeros_like(u)
    lead = u.ndim - grid.n
    for ax, h in enumerate(grid.spacing):
        axis = lead + ax
        # flux across interior faces; boundary faces carry zero flux
        flux = np.diff(u, axis=axis)
        pad = [(0, 0)] * u.ndim
        pad[axis] = (1, 1)
        flux = np.pad(flux, pad)
        out += np.diff(flux, axis=axis) / h**2
    return out


def gradient(u, grid: SpatialGrid) -> list[np.ndarray]:
    """Forward differences across interior faces, one array per axis.

    With this gradient the Laplacian factors as ``-grad^T grad`` in the
    h^n-weighted inner product.
    """
    u = np.asarray(u, float)
    _check_shape(u, grid)
    lead = u.ndim - grid.n
    return [np.diff(u, axis=lead + ax) / h for ax, h in enumerate(grid.spacing)]


def dirichlet_energy(u, grid: SpatialGrid) -> float:
    """sum |grad_h u|^2 h^n."""
    return float(sum(np.sum(g * g) for g in gradient(u, grid)) * grid.cell_volume)


def _neumann_1d(N: int, h: float) -> sp.csr_matrix:
    main = np.full(N, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(N - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


@functools.lru_cache(maxsize=32)
def laplacian_matrix(grid: SpatialGrid) -> sp.csr_matrix:
    """Sparse matrix of :func:`laplacian` acting on C-ordered flattened nodes."""
    mats = [_neumann_1d(N, h) for N, h in zip(grid.counts, grid.spacing)]
    if grid.n == 1:
        return mats[0].tocsr()
    I0, I1 = sp.identity(grid.counts[0]), sp.identity(grid.counts[1])
    return (sp.kron(mats[0], I1) + sp.kron(I0, mats[1])).tocsr()


def lp_norm(u, grid: SpatialGrid, p: float = 2.0) -> float:
    """(sum_x |u(x)|^p h^n)^(1/p); p = inf gives max |u|."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    u = np.asarray(u, float)
    if np.isinf(p):
        return float(np.max(np.abs(u)))
    a = np.abs(u)
    if p == 1:
        return float(np.sum(a) * grid.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * grid.cell_volume))
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


def spatial_average(u, grid: SpatialGrid) -> float:
    """Midpoint-rule mean over the box."""
    u = np.asarray(u, float)
    _check_shape(u, grid)
    return float(np.mean(u))


def poincare_constant(grid: SpatialGrid) -> float:
    """Smallest nonzero eigenvalue of the discrete Neumann operator -Delta_h."""
    return float(min((2.0 / h**2) * (1.0 - np.cos(np.pi * h / L)) for h, L in zip(grid.spacing, grid.lengths)))


@functools.lru_cache(maxsize=64)
def _heat_factor(grid: SpatialGrid, coeff: float):
    A = (sp.identity(grid.size, format="csc") - coeff * laplacian_matrix(grid)).tocsc()
    return A, splu(A)


def heat_solve_implicit(u, grid: SpatialGrid, d: float, dt: float, rtol: float = 1e-12) -> np.ndarray:
    """One backward-Euler diffusion step: solve (I - dt d Delta_h) w = u.

    Uses a cached sparse LU factorization, with one round of iterative
    refinement if the residual exceeds ``rtol * ||u||_2``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if d < 0:
        raise ValueError("diffusion must be nonnegative")
    u = np.asarray(u, float)
    if u.shape != grid.shape:
        raise ValueError(f"array shape {u.shape} does not match grid {grid.shape}")
    if d == 0:
        return u.copy()
    A, lu = _heat_factor(grid, float(d) * float(dt))
    b = u.ravel()
    w = lu.solve(b)
    tol = rtol * np.linalg.norm(b)
    r = b - A @ w
    if np.linalg.norm(r) > tol:
        w = w + lu.solve(r)
        r = b - A @ w
        if np.linalg.norm(r) > tol:
            raise SolverError(f"implicit heat solve residual {np.linalg.norm(r):.3e} exceeds {tol:.3e}")
    return w.reshape(grid.shape)


# ---------------------------------------------------------------------------
# Empirical maximal-regularity constant


@dataclass
class RegularityEstimate:
    """Running maximum of ||Delta phi||_p / ||theta||_p over random sources."""

    d: float
    p: float
    C_hat: float
    samples: int
    T: float
    dt: float
    ratios: np.ndarray = field(repr=False)
    running_max: np.ndarray = field(repr=False)

    @property
    def p_conjugate(self) -> float:
        return self.p / (self.p - 1.0) if self.p > 1 else np.inf


def spacetime_norm(series: np.ndarray, grid: SpatialGrid, dt: float, p: float) -> float:
    """(sum_t sum_x |.|^p h^n dt)^(1/p) for a (steps, *grid.shape) array."""
    a = np.abs(np.asarray(series, float))
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * grid.cell_volume * dt) ** (1.0 / p))


def regularity_ratio(grid: SpatialGrid, d: float, p: float, theta: np.ndarray, dt: float) -> float:
    """||Delta_h phi||_p / ||theta||_p for phi_t - d Delta phi = theta, phi(0) = 0.

    ``theta`` has shape (steps, *grid.shape); step k applies theta[k] and the
    norm pairs it with Delta_h phi at the end of that step.
    """
    theta = np.asarray(theta, float)
    phi = grid.zeros()
    lap = np.empty_like(theta)
    for k in range(theta.shape[0]):
        phi = heat_solve_implicit(phi + dt * theta[k], grid, d, dt)
        lap[k] = laplacian(phi, grid)
    den = spacetime_norm(theta, grid, dt, p)
    if den == 0:
        return 0.0
    return spacetime_norm(lap, grid, dt, p) / den


def estimate_regularity_constant(
    grid: SpatialGrid,
    d: float,
    p: float,
    sources: int = 8,
    T: float = 1.0,
    dt: float = 1e-2,
    seed: int = 0,
) -> RegularityEstimate:
    """Estimate the maximal-regularity constant C_{d,p} on ``grid``.

    Each source is node-wise standard normal noise, redrawn every step.
    Sources share the ``seed`` stream, so runs with different ``d`` but the
    same seed see identical forcing.
    """
    if sources < 1:
        raise ValueError("need at least one source")
    if d <= 0:
        raise ValueError("d must be positive")
    steps = max(1, int(round(T / dt)))
    rng = np.random.default_rng(seed)
    ratios = np.empty(sources)
    for s in range(sources):
        theta = rng.standard_normal((steps,) + grid.shape)
        ratios[s] = regularity_ratio(grid, d, p, theta, dt)
    running = np.maximum.accumulate(ratios)
    return RegularityEstimate(float(d), float(p), float(running[-1]), sources, steps * dt, dt, ratios, running)


# ---------------------------------------------------------------------------
# CSV snapshots


def write_field_csv(path_or_buf, state: FieldState, species: Sequence[str]) -> None:
    """One row per node: coordinates then species values; metadata in a comment header."""
    grid = state.grid
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        fh.write(
            f"# n={grid.n} lengths={','.join(repr(L) for L in grid.lengths)} "
            f"counts={','.join(str(N) for N in grid.counts)} t={state.t!r}\n"
        )
        names = ["x", "y"][: grid.n]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + list(species))
        coords = [c.ravel() for c in grid.coordinates()]
        vals = state.values.reshape(state.m, -1)
        for j in range(grid.size):
            writer.writerow([repr(float(c[j])) for c in coords] + [repr(float(v[j])) for v in vals])
    finally:
        if own:
            fh.close()


def read_field_csv(path_or_buf) -> tuple[FieldState, list[str]]:
    """Inverse of :func:`write_field_csv`."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, encoding="utf-8") if own else path_or_buf
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    header, _, body = text.partition("\n")
    if not header.startswith("#"):
        raise ValueError("missing grid metadata header")
    meta = dict(item.split("=", 1) for item in header[1:].split())
    grid = SpatialGrid(
        tuple(float(x) for x in meta["lengths"].split(",")),
        tuple(int(x) for x in meta["counts"].split(",")),
    )
    rows = list(csv.reader(io.StringIO(body)))
    names = rows[0][grid.n :]
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    values = data[:, grid.n :].T.reshape((len(names),) + grid.shape)
    return FieldState(grid, values, float(meta["t"])), names
