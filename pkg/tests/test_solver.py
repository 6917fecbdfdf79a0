import math

import numpy as np
import pytest

from rdslab.grid import FieldState, SpatialGrid
from rdslab.network import MassAction, parse_network
from rdslab.solver import (
    CutoffPhi,
    CutoffPsi,
    NumericalError,
    PositivityError,
    SimConfig,
    Truncated,
    averaged_residual,
    lipschitz_estimate,
    lipschitz_on_box,
    simulate,
    simulate_ode,
    step_imex,
)

DECAY = parse_network("A -> 0 @ 1")
ISOMER = parse_network("A <-> B @ 1, 1")
BINDING = parse_network("A + B -> C @ 1")


def _bump(grid, m=1, base=1.0, amp=0.5):
    (x,) = grid.coordinates()[:1]
    return np.stack([base + amp * np.cos(np.pi * (i + 1) * x) for i in range(m)])


# --- cutoffs -----------------------------------------------------------------


def test_psi_values():
    psi = CutoffPsi(2.0)
    assert psi(1.0) == 0.0 and psi(2.0) == 0.0
    assert psi(2.5) == 0.5 and psi(3.0) == 1.0 and psi(10.0) == 1.0
    t = np.linspace(0, 5, 2001)
    assert psi.derivative(t).max() == pytest.approx(1.5, abs=1e-6)
    # derivative matches finite differences
    h = 1e-6
    s = np.array([2.1, 2.4, 2.9])
    assert np.allclose(psi.derivative(s), (psi(s + h) - psi(s - h)) / (2 * h), atol=1e-8)


def test_phi_values_and_slope():
    phi = CutoffPhi(2.0)
    assert phi(np.array([[0.0], [1.9]]))[0] == 1.0
    assert phi(np.array([4.0, 0.0])) == 0.0
    assert phi(np.array([3.0])) == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-5, 5, size=(2, 2, 5000))
    slope = np.abs(phi(a) - phi(b)) / np.linalg.norm(a - b, axis=0)
    assert slope.max() <= phi.slope_bound
    assert phi.gradient_norm(np.array([[3.0], [0.0]]))[0] == pytest.approx(phi.slope_bound)
    with pytest.raises(ValueError):
        CutoffPhi(0.0)


def test_truncated_nonlinearity():
    f = MassAction(BINDING)
    tr = Truncated(f, CutoffPhi(1.0))
    inside = np.array([0.3, 0.4, 0.2])
    assert np.array_equal(tr(inside), f(inside))
    assert np.all(tr(np.array([2.0, 1.0, 0.5])) == 0.0)
    shifted = Truncated(f, CutoffPhi(1.0), z0=[5.0, 5.0, 5.0])
    assert np.array_equal(shifted(np.array([5.2, 5.1, 4.9])), f(np.array([5.2, 5.1, 4.9])))


def test_lipschitz_linear_examples():
    f = MassAction(parse_network("A -> 0 @ 3"))
    # close pairs lose about 1e-7 relative accuracy to cancellation
    assert lipschitz_on_box(f, 5.0) == pytest.approx(3.0, rel=1e-6)
    est = lipschitz_estimate(f, CutoffPhi(1.0), samples=500)
    assert est.pair_value == pytest.approx(3.0, rel=1e-6)
    assert est.growth_value <= 3.0 + 1e-12
    assert est.value == max(est.pair_value, est.growth_value)


def test_lipschitz_quadratic_on_box():
    # f(u) = (-u_A u_B, -u_A u_B, u_A u_B): gradient norm sqrt(3)|(u_B, u_A)| <= sqrt(6) on [0,1]^3
    L = lipschitz_on_box(MassAction(BINDING), 1.0, samples=20000)
    assert 0.9 * math.sqrt(6) <= L <= math.sqrt(6) + 1e-9


# --- configuration -----------------------------------------------------------


def _cfg(**kw):
    base = dict(nonlinearity=DECAY, diffusion=[1.0], grid=SpatialGrid.interval(16), initial=_bump, dt=0.01, t_end=0.1)
    base.update(kw)
    return SimConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [
        {"diffusion": [1.0, 2.0]},
        {"diffusion": [0.0]},
        {"dt": 0.0},
        {"t_end": -1.0},
        {"stride": 0},
        {"truncation_radius": -1.0},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _cfg(**kw)


def test_initial_data_shapes():
    assert _cfg(initial=[2.0]).initial_values().shape == (1, 16)
    with pytest.raises(ValueError):
        _cfg(initial=np.zeros((1, 15))).initial_values()
    with pytest.raises(ValueError):
        simulate(_cfg(t_end=0.105))


# --- time stepping -----------------------------------------------------------


def test_decay_mass_is_exact_forward_euler():
    # diffusion conserves mass exactly, so the total follows (1 - dt)^k
    cfg = _cfg(t_end=0.5)
    traj = simulate(cfg)
    m0 = traj.diagnostics["total_mass"][0]
    k = np.round(traj.times / cfg.dt)
    assert np.allclose(traj.diagnostics["total_mass"], m0 * (1 - cfg.dt) ** k, rtol=1e-12)
    assert traj.steps == 50 and len(traj) == 51


def test_rescale_speeds_up_reaction_and_diffusion():
    cfg = _cfg(diffusion=[4.0], rescale=True, t_end=0.5)
    assert cfg.time_scale == 0.25 and cfg.effective_diffusion == (1.0,)
    traj = simulate(cfg)
    k = np.round(traj.times / cfg.dt)
    m0 = traj.diagnostics["total_mass"][0]
    assert np.allclose(traj.diagnostics["total_mass"], m0 * (1 - 0.25 * cfg.dt) ** k, rtol=1e-12)


def test_uniform_data_follow_the_ode_recurrence():
    g = SpatialGrid.square(6)
    cfg = SimConfig(ISOMER, [1.0, 3.0], g, [2.0, 0.0], dt=0.01, t_end=0.2)
    traj = simulate(cfg)
    v = np.array([2.0, 0.0])
    f = MassAction(ISOMER)
    for _ in range(20):
        v = v + 0.01 * f(v)
    assert np.allclose(traj.fields[-1].reshape(2, -1), v[:, None], atol=1e-14)
    # and first-order close to the exact solution 1 + exp(-2t)
    assert abs(traj.diagnostics["avg"][-1, 0] - (1 + math.exp(-0.4))) <= 0.01


def test_step_imex_matches_simulate():
    cfg = _cfg(t_end=0.01)
    traj = simulate(cfg)
    st = step_imex(FieldState(cfg.grid, cfg.initial_values()), cfg)
    assert np.array_equal(st.values, traj.fields[-1]) and st.t == pytest.approx(0.01)
    with pytest.raises(ValueError):
        step_imex(FieldState(cfg.grid, np.full((1, 16), np.nan)), cfg)


def test_step_halving_keeps_positivity():
    cfg = _cfg(dt=3.0, t_end=6.0, initial=[1.0])
    traj = simulate(cfg)
    assert traj.rejected_steps > 0
    assert traj.fields.min() >= 0.0
    with pytest.raises(PositivityError):
        simulate(_cfg(dt=3.0, t_end=3.0, initial=[1.0], max_halvings=0))
    assert issubclass(PositivityError, NumericalError)


def test_blow_up_is_detected():
    # u' = u^2 from u = 1 blows up at t = 1
    cfg = _cfg(nonlinearity=parse_network("2 A -> 3 A @ 1"), initial=[1.0], dt=1e-3, t_end=2.0)
    traj = simulate(cfg)
    assert traj.blow_up and 0.9 < traj.blow_up_time < 1.1
    assert traj.times[-1] < traj.blow_up_time


def test_zero_length_run_and_stride():
    traj = simulate(_cfg(t_end=0.0))
    assert len(traj) == 1 and traj.steps == 0
    traj = simulate(_cfg(t_end=0.1, stride=3))
    assert np.allclose(traj.times, [0.0, 0.03, 0.06, 0.09, 0.1])


def test_runs_are_deterministic(tmp_path):
    cfg = dict(nonlinearity=BINDING, diffusion=[1, 2, 3], initial=lambda g: _bump(g, 3))
    a, b = simulate(_cfg(**cfg)), simulate(_cfg(**cfg))
    for traj, name in ((a, "a"), (b, "b")):
        traj.write(tmp_path / name)
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()
    head = (tmp_path / "a" / "diagnostics.csv").read_text().splitlines()[0]
    assert head.startswith("t,A_L1,A_L2,A_Linf,A_avg,B_L1") and head.endswith("total_mass")
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == [
        "diagnostics.csv",
        "fields_0.csv",
        "fields_10.csv",
        "summary.json",
    ]


def test_entropy_column_when_equilibrium_given():
    cfg = SimConfig(ISOMER, [1.0, 1.0], SpatialGrid.interval(16), lambda g: _bump(g, 2), 0.01, 0.5, equilibrium=[1.0, 1.0])
    traj = simulate(cfg)
    assert "entropy" in traj.csv_columns()
    assert np.all(np.diff(traj.diagnostics["entropy"]) <= 1e-14)


# --- ODE integrator ----------------------------------------------------------


def test_rk4_fourth_order():
    errs = []
    for dt in (0.1, 0.05, 0.025):
        traj = simulate_ode(DECAY, [1.0], dt, 1.0)
        errs.append(abs(traj.fields[-1, 0] - math.exp(-1.0)))
    for a, b in zip(errs, errs[1:]):
        assert 14 < a / b < 18


def test_ode_conserves_isomer_mass_and_validates():
    traj = simulate_ode(ISOMER, [2.0, 0.5], 0.01, 3.0, stride=10)
    assert np.allclose(traj.fields.sum(axis=1), 2.5, rtol=1e-14)
    with pytest.raises(ValueError):
        simulate_ode(ISOMER, [-1.0, 0.0], 0.01, 1.0)
    with pytest.raises(ValueError):
        simulate_ode(ISOMER, [1.0], 0.01, 1.0)


# --- averaged residual -------------------------------------------------------


def test_averaged_residual():
    g = SpatialGrid.interval(32)
    lin = simulate(SimConfig(ISOMER, [1.0, 2.0], g, lambda g: _bump(g, 2), 0.01, 0.1))
    assert np.abs(averaged_residual(lin, ISOMER)).max() <= 1e-14
    nl = simulate(SimConfig(BINDING, [1.0, 1.0, 1.0], g, lambda g: _bump(g, 3), 0.01, 0.0))
    res = averaged_residual(nl, BINDING)
    # mean(ab) - mean(a) mean(b) for a = 1 + .5 cos(pi x), b = 1 + .5 cos(2 pi x) is 0 on the grid
    assert np.abs(res).max() <= 1e-14
    same = simulate(SimConfig(BINDING, [1.0, 1.0, 1.0], g, lambda g: np.stack([_bump(g)[0]] * 3), 0.01, 0.0))
    # mean(a^2) - mean(a)^2 = 0.125 for the same cosine
    assert averaged_residual(same, BINDING)[0] == pytest.approx([-0.125, -0.125, 0.125], abs=1e-14)


# --- further closed-form oracles ---------------------------------------------


def test_zero_reaction_keeps_constant_state():
    net = parse_network("A -> B @ 1")
    cfg = SimConfig(net, [1.0, 1.0], SpatialGrid.interval(8), [0.0, 2.0], 0.1, 1.0)
    # the sparse solve reproduces constants up to roundoff
    assert np.allclose(simulate(cfg).fields[-1], np.full((2, 8), [[0.0], [2.0]]), rtol=0, atol=1e-13)
    traj = simulate_ode(net, [0.0, 2.0], 0.1, 1.0)
    assert np.array_equal(traj.fields[-1], [0.0, 2.0])


def test_isomer_converges_to_one_one():
    cfg = SimConfig(ISOMER, [1.0, 1.0], SpatialGrid.interval(16), [2.0, 0.0], 0.01, 20.0, stride=100)
    traj = simulate(cfg)
    assert np.abs(traj.fields[-1] - 1.0).max() <= 1e-6


def test_equal_diffusion_sum_obeys_maximum_principle():
    cfg = SimConfig(BINDING, [2.0, 2.0, 2.0], SpatialGrid.interval(32), lambda g: _bump(g, 3), 0.01, 1.0)
    s = simulate(cfg).diagnostics["sum_Linf"]
    assert np.max(np.diff(s)) <= 1e-12


def test_truncation_inactive_when_radius_exceeds_solution():
    base = dict(nonlinearity=BINDING, diffusion=[1.0, 2.0, 3.0], initial=lambda g: _bump(g, 3), t_end=0.5)
    plain = simulate(_cfg(**base))
    cut = simulate(_cfg(truncation_radius=10.0, **base))
    assert np.abs(cut.fields - plain.fields).max() <= 1e-12


def test_ode_closed_forms():
    traj = simulate_ode(parse_network("A -> B @ 1"), [1.0, 0.0], 1e-3, 2.0, stride=100)
    assert np.abs(traj.fields[:, 0] - np.exp(-traj.times)).max() <= 1e-8
    cyc = parse_network("A -> B @ 1\nB -> C @ 1\nC -> A @ 1")
    traj = simulate_ode(cyc, [3.0, 0.0, 0.0], 1e-2, 20.0, stride=100)
    assert np.abs(traj.fields[-1] - 1.0).max() <= 1e-10


def test_averaged_residual_sign_for_anticorrelated_bumps():
    g = SpatialGrid.interval(32)
    (x,) = g.coordinates()
    u0 = np.stack([1 + 0.5 * np.cos(np.pi * x), 1 - 0.5 * np.cos(np.pi * x), np.zeros_like(x)])
    traj = simulate(SimConfig(BINDING, [1.0, 1.0, 1.0], g, u0, 0.01, 0.0))
    assert averaged_residual(traj, BINDING)[0, 2] < 0
    with pytest.raises(ValueError):
        averaged_residual(simulate_ode(BINDING, [1.0, 1.0, 0.0], 0.1, 0.1), BINDING)
