"""Reaction-diffusion laboratory for mass-dissipating networks on Neumann boxes."""

from .network import (
    BUILTINS,
    Builtin,
    DissipationClass,
    MassAction,
    NetworkSyntaxError,
    ReactionNetwork,
    builtin,
    check_complex_balance,
    check_quasi_positivity,
    classify_dissipation,
    conservation_laws,
    evaluate_f,
    format_network,
    growth_exponent,
    load_network,
    parse_network,
)
from .grid import (
    FieldState,
    SpatialGrid,
    estimate_regularity_constant,
    heat_solve_implicit,
    laplacian,
    lp_norm,
    poincare_constant,
    spatial_average,
)
from .equilibria import (
    EquilibriumError,
    EquilibriumKind,
    EquilibriumSolution,
    find_boundary_equilibria_single,
    relative_entropy_field,
    relative_entropy_vector,
    solve_complex_balanced_equilibrium,
    solve_single_reversible_equilibrium,
)
from .solver import (
    CutoffPhi,
    CutoffPsi,
    SimConfig,
    Trajectory,
    averaged_residual,
    lipschitz_estimate,
    simulate,
    simulate_ode,
    step_imex,
)
from .analysis import (
    bootstrap_schedule,
    b_m_bound,
    fit_exponential,
    gronwall_ceiling,
    large_diffusion_K,
    poincare_gap,
    quasi_uniform_condition,
    uniform_bound_report,
    young_bound,
)

__version__ = "0.1.0"
