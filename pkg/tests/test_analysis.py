import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdslab.analysis import (
    Inequality,
    b_m_bound,
    bootstrap_schedule,
    fit_exponential,
    gronwall_ceiling,
    large_diffusion_K,
    max_increase,
    poincare_gap,
    q_exponent,
    quasi_uniform_condition,
    schedule_inequalities,
    tail_ratio,
    uniform_bound_report,
    young_bound,
)
from rdslab.grid import SpatialGrid
from rdslab.network import parse_network
from rdslab.solver import SimConfig, simulate

# --- schedules ---------------------------------------------------------------


@pytest.mark.parametrize(
    "n, mu, K, qK",
    [(1, 2, 2, 2.25), (2, 2, 3, 64 / 27), (1, 1, 0, None)],
)
def test_schedule_table(n, mu, K, qK):
    s = bootstrap_schedule(n, mu)
    assert s.K == K and len(s.q_list) == K
    assert s.J == K + 1 and s.L == K + 2
    if qK is not None:
        assert s.q_list[-1] == pytest.approx(qK, rel=1e-15)


def test_schedule_p_recursion_n1_mu2():
    s = bootstrap_schedule(1, 2)
    # p0 = q_2 = 2.25, x = 1.125, p1 = 3 * 1.125 / (3 - 2.25) = 4.5 > 2 * 1.5
    assert s.p_list == pytest.approx([2.25, 4.5])
    assert s.k0 == 1
    assert all(q.holds for q in schedule_inequalities(s))


def test_schedule_recursion_stops_on_nonpositive_denominator():
    # p0/mu = 1.5 is not above 3/2, and the next denominator 3 - 2*1.5 vanishes
    s = bootstrap_schedule(1, 1, p0=1.5)
    assert s.p_list == [1.5, math.inf] and s.k0 == 1


def test_schedule_validation():
    with pytest.raises(ValueError):
        bootstrap_schedule(0, 2)
    with pytest.raises(ValueError):
        bootstrap_schedule(1, 0.5)
    with pytest.raises(ValueError):
        bootstrap_schedule(1, 2, p0=1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.floats(1.0, 6.0))
def test_schedule_inequalities_hold(n, mu):
    s = bootstrap_schedule(n, mu)
    assert all(q.holds for q in schedule_inequalities(s))
    assert q_exponent(n, s.K) > s.threshold
    assert s.K == 0 or q_exponent(n, s.K - 1) <= s.threshold


@pytest.mark.parametrize("n, K", [(1, 0), (2, 1), (3, 1), (4, 2)])
def test_large_diffusion_K(n, K):
    assert large_diffusion_K(n) == (K, K + 2)


# --- regime checks and closed forms ------------------------------------------


def test_quasi_uniform_condition_arithmetic():
    one = lambda d, q: 1.0
    assert quasi_uniform_condition([2, 2, 2], 1, 2, one).passed
    rep = quasi_uniform_condition([1, 3], 1, 2, one)
    assert not rep.passed and len(rep.checks) == 2
    assert rep.checks[0].lhs == 1.0 and rep.checks[0].relation == "<"
    assert quasi_uniform_condition([1, 1.5], 1, 2, one).passed
    rep = quasi_uniform_condition([1, 9], 1, 1, one)
    assert rep.passed and rep.notes and not rep.checks
    # provider receives d = (d_max + d_min)/2 and the conjugate exponents
    seen = []
    quasi_uniform_condition([1, 3], 1, 2, lambda d, q: seen.append((d, q)) or 0.0)
    assert seen == [(2.0, pytest.approx(3.0)), (2.0, pytest.approx(2.25 / 1.25))]


def test_young_bound_examples_and_dominance():
    assert young_bound(1.0, 0.5) == pytest.approx(1.0)
    assert young_bound(0.0, 0.3) == 0.0
    with pytest.raises(ValueError):
        young_bound(1.0, 1.0)
    rng = np.random.default_rng(0)
    for A, eps in zip(rng.uniform(0, 10, 1000), rng.uniform(0.01, 0.99, 1000)):
        X = np.linspace(0, 2 * A ** (1 / (1 - eps)) + 1, 10_000)
        ok = X <= A * X**eps
        assert X[ok].max() <= young_bound(A, eps) * (1 + 1e-12)


def test_gronwall_ceiling():
    assert gronwall_ceiling(3.0, 0.0, 5.0, 2) == 3.0
    assert gronwall_ceiling(1.0, 1.0, 1.0, 0) == pytest.approx(math.e)
    base = gronwall_ceiling(1.0, 0.5, 1.0, 1)
    for bumped in ((2.0, 0.5, 1.0, 1), (1.0, 0.6, 1.0, 1), (1.0, 0.5, 1.1, 1), (1.0, 0.5, 1.0, 2)):
        assert gronwall_ceiling(*bumped) > base
    with pytest.raises(ValueError):
        gronwall_ceiling(-1.0, 1.0, 1.0, 0)


def test_b_m_bound():
    b = b_m_bound(M=1.0, L_M=1.0, eps_K1=0.5, C_embed=1.0)
    assert b.value == pytest.approx(9.0) and b.gronwall_branch == pytest.approx(math.e)
    assert b_m_bound(2.0, 0.0, 0.5, 1.0, K=1).value == pytest.approx(2 * math.e**2)
    assert b_m_bound(0.0, 4.0, 0.5, 1.0).value == pytest.approx(9.0 * 4.0)
    assert b.C_embed_source == "user-supplied"
    with pytest.raises(ValueError):
        b_m_bound(1.0, 1.0, 0.0, 1.0)


def test_poincare_gap():
    assert poincare_gap(2.0, 1.0, 4.0) == 0.0
    assert poincare_gap(3.0, 1.0, 4.0) == 2.0
    assert poincare_gap(1.0, 1.0, 4.0) < 0


# --- fits and reports --------------------------------------------------------


def test_fit_exact_exponential():
    t = np.linspace(0, 2, 21)
    fit = fit_exponential(t, 2 * np.exp(-3 * t))
    assert fit.C == pytest.approx(2, abs=1e-10) and fit.lam == pytest.approx(3, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-10)
    assert fit_exponential(t, np.full(21, 5.0)).lam == pytest.approx(0.0, abs=1e-12)


def test_fit_with_offset_and_floor():
    t = np.linspace(0, 5, 101)
    fit = fit_exponential(t, np.exp(-t) + 1e-3, window=(0, 3))
    assert 0.8 < fit.lam < 1.0
    y = np.exp(-10 * t)
    y[t > 3] = 1e-20  # below the floor, dropped
    fit = fit_exponential(t, y)
    assert fit.lam == pytest.approx(10.0) and fit.n == int(np.sum(t <= 3))
    with pytest.raises(ValueError):
        fit_exponential(t[:4], np.exp(-t[:4]))


def test_tail_ratio():
    t = np.linspace(0, 3, 31)
    assert tail_ratio(t, np.ones_like(t)) == 1.0
    assert tail_ratio(t, np.exp(-t)) <= 1.0
    assert tail_ratio(t, t) == pytest.approx(3.0 / 2.0)


def test_uniform_bound_report_on_a_run():
    net = parse_network("A <-> B @ 1, 1")
    cfg = SimConfig(net, [1.0, 2.0], SpatialGrid.interval(16), [2.0, 0.0], 0.01, 3.0, stride=10)
    rep = uniform_bound_report(simulate(cfg))
    assert rep.global_solution and rep.bounded and rep.mass_nonincreasing
    assert rep.sup_Linf["A"] == pytest.approx(2.0)
    assert rep.tail_ratio <= 1.0 + 1e-12


def test_small_helpers():
    assert max_increase([3, 2, 2, 1]) == 0.0
    assert max_increase([1, 2, 1.5]) == 1.0
    assert max_increase([4.0]) == -math.inf
    q = Inequality.check("x", 1.0, "<", 1.0)
    assert not q.holds and q.as_dict()["relation"] == "<"
    assert Inequality.check("x", 1.0, "<=", 1.0).holds


def test_ratio_floor_survives_cancellation():
    # mu(n+2) - 2 p0 is about 0.12 here, so the floor carries ~250x roundoff
    assert all(q.holds for q in schedule_inequalities(bootstrap_schedule(3, 5.84375)))
    assert all(q.holds for q in schedule_inequalities(bootstrap_schedule(1, 1, p0=1.5)))
