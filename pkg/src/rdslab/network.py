"""Reaction networks: DSL parsing, mass-action nonlinearities and structural checks.

The reaction DSL has one reaction per line::

    # comments and blank lines are ignored
    A + B -> C @ 1.0
    2 A <-> B @ 0.5, 0.25     # reversible: forward rate, backward rate
    C -> 0 @ 0.1              # an empty side must be written as 0

Species are numbered in order of first appearance.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space


class NetworkSyntaxError(ValueError):
    """Raised for malformed reaction DSL input."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Reaction:
    """A single irreversible reaction ``alpha -> beta`` with rate constant ``k``."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    k: float

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.beta, float) - np.asarray(self.alpha, float)


def _check_coeff(c: float, lineno: Optional[int] = None) -> None:
    if c < 0 or 0 < c < 1:
        raise NetworkSyntaxError(f"stoichiometric coefficient {c} not in {{0}} U [1, inf)", lineno)


@dataclass(frozen=True)
class ReactionNetwork:
    """Species names plus a list of irreversible reactions.

    Reversible pairs are stored as two consecutive reactions.
    """

    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        m = len(self.species)
        if m == 0:
            raise ValueError("network needs at least one species")
        if len(set(self.species)) != m:
            raise ValueError("duplicate species names")
        for r in self.reactions:
            if len(r.alpha) != m or len(r.beta) != m:
                raise ValueError("stoichiometry length does not match species count")
            if not r.k > 0:
                raise ValueError(f"rate constant must be positive, got {r.k}")
            for c in r.alpha + r.beta:
                _check_coeff(c)
            if r.alpha == r.beta:
                raise ValueError("reaction with identical reactant and product complexes")

    @classmethod
    def from_arrays(cls, species: Sequence[str], alpha, beta, k) -> "ReactionNetwork":
        """Build from (R, m) reactant/product arrays and a length-R rate vector."""
        alpha = np.atleast_2d(np.asarray(alpha, float))
        beta = np.atleast_2d(np.asarray(beta, float))
        k = np.atleast_1d(np.asarray(k, float))
        reactions = tuple(
            Reaction(tuple(a.tolist()), tuple(b.tolist()), float(kr)) for a, b, kr in zip(alpha, beta, k)
        )
        return cls(tuple(species), reactions)

    @property
    def m(self) -> int:
        return len(self.species)

    @property
    def R(self) -> int:
        return len(self.reactions)

    @property
    def alpha(self) -> np.ndarray:
        """Reactant stoichiometry, shape (R, m)."""
        return np.array([r.alpha for r in self.reactions], float).reshape(self.R, self.m)

    @property
    def beta(self) -> np.ndarray:
        """Product stoichiometry, shape (R, m)."""
        return np.array([r.beta for r in self.reactions], float).reshape(self.R, self.m)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.k for r in self.reactions], float)

    @property
    def stoichiometric_matrix(self) -> np.ndarray:
        """The m x R matrix whose columns are beta_r - alpha_r."""
        return (self.beta - self.alpha).T

    def scaled(self, factor: float) -> "ReactionNetwork":
        """Copy with every rate constant multiplied by ``factor``."""
        return ReactionNetwork(
            self.species, tuple(Reaction(r.alpha, r.beta, r.k * factor) for r in self.reactions)
        )

    def reversible_pair(self) -> Optional[tuple[Reaction, Reaction]]:
        """Return (forward, backward) if the network is exactly one reversible pair."""
        if self.R != 2:
            return None
        fwd, bwd = self.reactions
        if fwd.alpha == bwd.beta and fwd.beta == bwd.alpha:
            return fwd, bwd
        return None


# ---------------------------------------------------------------------------
# DSL

_TERM = re.compile(r"^\s*(?:(?P<coef>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+)\s*\*?\s*)?(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*$")
_ARROW = re.compile(r"<->|->")


def _parse_side(text: str, lineno: int) -> list[tuple[str, float]]:
    text = text.strip()
    if not text:
        raise NetworkSyntaxError("empty reaction side (write 0 for no species)", lineno)
    if text == "0":
        return []
    terms = []
    for raw in text.split("+"):
        mt = _TERM.match(raw)
        if mt is None:
            raise NetworkSyntaxError(f"cannot parse term {raw.strip()!r}", lineno)
        coef = float(mt.group("coef")) if mt.group("coef") else 1.0
        _check_coeff(coef, lineno)
        if coef == 0:
            continue
        terms.append((mt.group("name"), coef))
    return terms


def _parse_rate(text: str, lineno: int) -> float:
    try:
        k = float(text)
    except ValueError:
        raise NetworkSyntaxError(f"bad rate constant {text.strip()!r}", lineno) from None
    if not np.isfinite(k) or k <= 0:
        raise NetworkSyntaxError(f"rate constant must be positive, got {text.strip()}", lineno)
    return k


def parse_network(text: str) -> ReactionNetwork:
    """Parse the reaction DSL into a :class:`ReactionNetwork`.

    Raises
    ------
    NetworkSyntaxError
        On malformed lines (with the 1-based line number), nonpositive rates,
        or coefficients in (0, 1).
    """
    species: list[str] = []
    index: dict[str, int] = {}
    raw: list[tuple[dict[str, float], dict[str, float], float]] = []

    def complex_of(terms):
        out: dict[str, float] = {}
        for name, c in terms:
            if name not in index:
                index[name] = len(species)
                species.append(name)
            out[name] = out.get(name, 0.0) + c
        return out

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.count("@") != 1:
            raise NetworkSyntaxError("expected exactly one '@' before the rate constant(s)", lineno)
        body, rate_text = line.split("@")
        arrows = _ARROW.findall(body)
        if len(arrows) != 1:
            raise NetworkSyntaxError("expected exactly one '->' or '<->'", lineno)
        lhs_text, rhs_text = _ARROW.split(body)
        lhs = complex_of(_parse_side(lhs_text, lineno))
        rhs = complex_of(_parse_side(rhs_text, lineno))
        rates = [s for s in rate_text.split(",")]
        if arrows[0] == "<->":
            if len(rates) != 2:
                raise NetworkSyntaxError("reversible reaction needs two rates 'kf, kb'", lineno)
            raw.append((lhs, rhs, _parse_rate(rates[0], lineno)))
            raw.append((rhs, lhs, _parse_rate(rates[1], lineno)))
        else:
            if len(rates) != 1:
                raise NetworkSyntaxError("irreversible reaction needs exactly one rate", lineno)
            raw.append((lhs, rhs, _parse_rate(rates[0], lineno)))
        if lhs == rhs:
            raise NetworkSyntaxError("reactant and product complexes are identical", lineno)

    if not species:
        raise NetworkSyntaxError("no species found")

    def vec(cplx):
        return tuple(float(cplx.get(s, 0.0)) for s in species)

    reactions = tuple(Reaction(vec(a), vec(b), k) for a, b, k in raw)
    return ReactionNetwork(tuple(species), reactions)


def _format_coef(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def _format_complex(species, y) -> str:
    terms = []
    for name, c in zip(species, y):
        if c == 0:
            continue
        terms.append(name if c == 1 else f"{_format_coef(c)} {name}")
    return " + ".join(terms) if terms else "0"


def format_network(network: ReactionNetwork) -> str:
    """Render a network back to DSL text (one irreversible reaction per line)."""
    lines = []
    for r in network.reactions:
        lines.append(
            f"{_format_complex(network.species, r.alpha)} -> "
            f"{_format_complex(network.species, r.beta)} @ {r.k!r}"
        )
    return "\n".join(lines) + "\n"


def load_network(path) -> ReactionNetwork:
    """Read a ``.crn`` file (UTF-8 DSL text)."""
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


# ---------------------------------------------------------------------------
# Nonlinearities


class MassAction:
    """Mass-action nonlinearity f(u) = sum_r k_r (beta_r - alpha_r) u^alpha_r.

    Callable on arrays of shape (m, ...); trailing axes are grid nodes.
    """

    kind = "mass-action"

    def __init__(self, network: ReactionNetwork):
        self.network = network
        self.m = network.m
        self._alpha = network.alpha
        self._S = network.stoichiometric_matrix
        self._k = network.rates
        # (reaction, species, exponent, integer?) factors; zero exponents skipped so 0^0 = 1
        self._factors = [
            [(i, a, float(a).is_integer()) for i, a in enumerate(row) if a != 0] for row in self._alpha
        ]

    @property
    def name(self) -> str:
        return "mass-action"

    def flows(self, u: np.ndarray) -> np.ndarray:
        """Reaction rates k_r u^alpha_r, shape (R, ...)."""
        u = np.asarray(u, float)
        out = np.empty((len(self._k),) + u.shape[1:])
        for r, factors in enumerate(self._factors):
            w = np.full(u.shape[1:], self._k[r])
            for i, a, integral in factors:
                if integral:
                    w = w * u[i] ** int(a)
                else:
                    w = w * np.maximum(u[i], 0.0) ** a
            out[r] = w
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        flows = self.flows(u)
        return np.tensordot(self._S, flows, axes=(1, 0))

    def __repr__(self):
        return f"MassAction({self.network.species})"


@dataclass(frozen=True)
class Builtin:
    """A named, globally defined nonlinearity with an optional Lyapunov hint.

    ``lyapunov(values, grid)`` returns a scalar functional of a field that the
    nonlinearity is known to dissipate.
    """

    name: str
    m: int
    func: Callable[[np.ndarray], np.ndarray]
    lyapunov: Optional[Callable] = field(default=None, compare=False)
    lyapunov_label: str = ""
    species: tuple[str, ...] = ()

    kind = "builtin"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.func(np.asarray(u, float))


def _remark_exponential(u: np.ndarray) -> np.ndarray:
    x, y = u[0], u[1]
    ey = np.exp(y)
    ex2 = np.exp(x * x)
    return np.stack([(-x + 2 * y) * ey - x * y * ex2, -y * y * ey + x * x * y * ex2])


def _remark_lyapunov(values: np.ndarray, grid) -> float:
    from .grid import lp_norm

    return 0.5 * lp_norm(values[0], grid, 2) ** 2 + lp_norm(values[1], grid, 1)


BUILTINS: dict[str, Builtin] = {
    "remark-1-4": Builtin(
        name="remark-1-4",
        m=2,
        func=_remark_exponential,
        lyapunov=_remark_lyapunov,
        lyapunov_label="0.5*||u||_2^2 + ||v||_1",
        species=("u", "v"),
    ),
}


def builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin nonlinearity {name!r}; known: {sorted(BUILTINS)}") from None


def species_names(spec) -> tuple[str, ...]:
    if isinstance(spec, MassAction):
        return spec.network.species
    if spec.species:
        return spec.species
    return tuple(f"u{i}" for i in range(spec.m))


def is_mass_action(spec) -> bool:
    return isinstance(spec, MassAction)


def evaluate_f(spec, u) -> np.ndarray:
    """Evaluate the nonlinearity at a state vector (or stacked field) ``u``.

    ``u`` has the species along axis 0. Raises ``ValueError`` on a dimension
    mismatch.
    """
    if isinstance(spec, ReactionNetwork):
        spec = MassAction(spec)
    u = np.asarray(u, float)
    if u.ndim == 0 or u.shape[0] != spec.m:
        raise ValueError(f"state has {u.shape[0] if u.ndim else 0} components, expected {spec.m}")
    return spec(u)


# ---------------------------------------------------------------------------
# Structural checks


@dataclass
class QuasiPositivityReport:
    passed: bool
    method: str
    witness: Optional[np.ndarray] = None
    species: Optional[int] = None


def check_quasi_positivity(spec, trials: int = 1000, box: float = 1.0, seed: int = 0) -> QuasiPositivityReport:
    """Check f_i(u) >= 0 whenever u >= 0 and u_i = 0.

    Mass-action networks pass structurally: a net loss of species i in a
    reaction needs alpha_r^i >= 1, so the monomial vanishes when u_i = 0.
    Builtins are sampled on [0, box]^m with one coordinate zeroed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(spec, ReactionNetwork):
        spec = MassAction(spec)
    if isinstance(spec, MassAction):
        for r in spec.network.reactions:
            for a, b in zip(r.alpha, r.beta):
                if b - a < 0 and a < 1:
                    return QuasiPositivityReport(False, "structural")
        return QuasiPositivityReport(True, "structural")

    rng = np.random.default_rng(seed)
    for _ in range(trials):
        u = rng.uniform(0.0, box, size=spec.m)
        i = int(rng.integers(spec.m))
        u[i] = 0.0
        fi = spec(u)[i]
        if not fi >= 0:
            return QuasiPositivityReport(False, "sampled", witness=u, species=i)
    return QuasiPositivityReport(True, "sampled")


class DissipationClass(enum.Enum):
    CONSERVATIVE = "conservative"
    DISSIPATIVE = "dissipative"
    INDEFINITE = "indefinite"


def classify_dissipation(network: ReactionNetwork) -> DissipationClass:
    """Classify by the per-reaction mass changes sum_i (beta_r^i - alpha_r^i)."""
    if isinstance(network, MassAction):
        network = network.network
    sums = (network.beta - network.alpha).sum(axis=1)
    if np.all(sums == 0):
        return DissipationClass.CONSERVATIVE
    if np.all(sums <= 0):
        return DissipationClass.DISSIPATIVE
    return DissipationClass.INDEFINITE


def growth_exponent(network: ReactionNetwork) -> float:
    """Largest total order over all reactant and product complexes."""
    if isinstance(network, MassAction):
        network = network.network
    return float(max(network.alpha.sum(axis=1).max(), network.beta.sum(axis=1).max()))


def conservation_laws(network: ReactionNetwork, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal rows spanning the left kernel of the stoichiometric matrix."""
    if isinstance(network, MassAction):
        network = network.network
    S = network.stoichiometric_matrix
    W = null_space(S.T, rcond=rtol).T
    for row in W:
        # sign convention: make the largest-magnitude entry positive
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    W[np.abs(W) < 1e-15] = 0.0
    return W


@dataclass
class ComplexBalanceReport:
    balanced: bool
    complexes: list[tuple[float, ...]]
    residuals: np.ndarray
    scale: float

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0


def complexes(network: ReactionNetwork) -> list[tuple[float, ...]]:
    """Distinct complexes in order of first appearance."""
    seen: dict[tuple[float, ...], None] = {}
    for r in network.reactions:
        seen.setdefault(r.alpha, None)
        seen.setdefault(r.beta, None)
    return list(seen)


def check_complex_balance(network: ReactionNetwork, u, rtol: float = 1e-12) -> ComplexBalanceReport:
    """Compare outflow and inflow of mass-action flux at every complex."""
    if isinstance(network, MassAction):
        network = network.network
    u = np.asarray(u, float)
    if u.shape != (network.m,):
        raise ValueError(f"state has shape {u.shape}, expected ({network.m},)")
    if np.any(u <= 0):
        raise ValueError("complex balance is checked at positive states only")
    flows = MassAction(network).flows(u)
    cplx = complexes(network)
    idx = {y: j for j, y in enumerate(cplx)}
    res = np.zeros(len(cplx))
    for r, w in zip(network.reactions, flows):
        res[idx[r.alpha]] += w
        res[idx[r.beta]] -= w
    scale = float(np.max(flows)) if len(flows) else 0.0
    balanced = bool(np.all(np.abs(res) <= rtol * scale))
    return ComplexBalanceReport(balanced, cplx, res, scale)
