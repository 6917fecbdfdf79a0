import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdslab.network import (
    Builtin,
    DissipationClass,
    MassAction,
    NetworkSyntaxError,
    builtin,
    check_complex_balance,
    check_quasi_positivity,
    classify_dissipation,
    complexes,
    conservation_laws,
    evaluate_f,
    format_network,
    growth_exponent,
    load_network,
    parse_network,
)


# --- parsing -----------------------------------------------------------------


def test_parse_single_reaction():
    net = parse_network("A -> B @ 1.0")
    assert net.species == ("A", "B")
    assert net.m == 2 and net.R == 1
    r = net.reactions[0]
    assert r.alpha == (1.0, 0.0) and r.beta == (0.0, 1.0) and r.k == 1.0


def test_parse_reversible_expands_to_two_reactions():
    net = parse_network("A + B <-> 2 B @ 1.0, 0.5")
    fwd, bwd = net.reactions
    assert (fwd.alpha, fwd.beta, fwd.k) == ((1.0, 1.0), (0.0, 2.0), 1.0)
    assert (bwd.alpha, bwd.beta, bwd.k) == ((0.0, 2.0), (1.0, 1.0), 0.5)


def test_empty_product_side_needs_explicit_zero():
    with pytest.raises(NetworkSyntaxError):
        parse_network("A -> @ 1.0")
    net = parse_network("A -> 0 @ 1.0")
    assert net.reactions[0].beta == (0.0,)


def test_comments_blank_lines_and_line_numbers():
    net = parse_network("# decay\n\nA -> B @ 2  # trailing\n")
    assert net.R == 1 and net.rates[0] == 2.0
    with pytest.raises(NetworkSyntaxError) as info:
        parse_network("A -> B @ 1\nA -> B @ -1\n")
    assert info.value.lineno == 2


@pytest.mark.parametrize(
    "text",
    [
        "A -> B @ 0",  # nonpositive rate
        "0.5 A -> B @ 1",  # coefficient in (0, 1)
        "A -> A @ 1",  # no-op reaction
        "A B -> C @ 1",
        "A -> B",
        "A <-> B @ 1",
    ],
)
def test_parse_errors(text):
    with pytest.raises(NetworkSyntaxError):
        parse_network(text)


def test_fractional_coefficients_at_least_one_are_accepted():
    net = parse_network("1.5 A + B <-> C @ 2, 0.7")
    assert net.reactions[0].alpha == (1.5, 1.0, 0.0)
    # monomial with fractional exponent vanishes at u_A = 0
    assert MassAction(net).flows(np.array([0.0, 1.0, 1.0]))[0] == 0.0


def test_format_round_trip(tmp_path):
    net = parse_network("A + B <-> 2 B @ 1, 2\n2 A + B -> 3 C @ 0.25")
    assert parse_network(format_network(net)) == net
    path = tmp_path / "net.crn"
    path.write_text(format_network(net), encoding="utf-8")
    assert load_network(path) == net


# --- evaluation --------------------------------------------------------------


def test_evaluate_hand_values():
    assert np.allclose(evaluate_f(parse_network("A -> B @ 1"), [2.0, 0.0]), [-2.0, 2.0])
    assert np.allclose(evaluate_f(parse_network("A + B <-> 2 B @ 1, 1"), [1.0, 1.0]), [0.0, 0.0])
    net = parse_network("A + B -> C @ 1\n2 C -> A @ 3")
    assert np.all(evaluate_f(net, np.zeros(3)) == 0.0)


def test_zero_power_convention():
    # species absent from the reactant complex do not gate the rate
    net = parse_network("A -> B @ 1")
    assert np.allclose(evaluate_f(net, [1.0, 0.0]), [-1.0, 1.0])


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate_f(parse_network("A -> B @ 1"), [1.0, 2.0, 3.0])


def test_evaluate_on_stacked_fields():
    net = parse_network("A + B -> C @ 2")
    u = np.random.default_rng(1).uniform(size=(3, 5, 4))
    f = evaluate_f(net, u)
    assert f.shape == u.shape
    assert np.allclose(f[2], 2 * u[0] * u[1])


def test_remark_builtin_formula():
    b = builtin("remark-1-4")
    u, v = 0.3, -0.7
    f = b(np.array([u, v]))
    assert np.isclose(f[0], (-u + 2 * v) * np.exp(v) - u * v * np.exp(u * u))
    assert np.isclose(f[1], -v * v * np.exp(v) + u * u * v * np.exp(u * u))
    with pytest.raises(KeyError):
        builtin("nope")


# --- structural checks -------------------------------------------------------


def test_quasi_positivity():
    assert check_quasi_positivity(parse_network("A + B -> C @ 1")).passed
    rep = check_quasi_positivity(builtin("remark-1-4"), trials=1000)
    assert rep.passed and rep.method == "sampled"
    bad = Builtin("neg", 1, lambda u: -np.ones_like(u))
    rep = check_quasi_positivity(bad, trials=10)
    assert not rep.passed and rep.witness is not None and rep.witness[rep.species] == 0.0


def test_dissipation_classes():
    assert classify_dissipation(parse_network("A + B -> C @ 1")) is DissipationClass.DISSIPATIVE
    assert classify_dissipation(parse_network("A <-> B @ 1, 1")) is DissipationClass.CONSERVATIVE
    assert classify_dissipation(parse_network("A -> 2 A @ 1")) is DissipationClass.INDEFINITE


def test_growth_exponent():
    assert growth_exponent(parse_network("A + B <-> 2 B @ 1, 1")) == 2
    assert growth_exponent(parse_network("A -> B @ 1")) == 1
    assert growth_exponent(parse_network("2 A + B -> 3 C @ 1")) == 3


@pytest.mark.parametrize(
    "text, row",
    [
        ("A <-> B @ 1, 1", [1, 1]),
        ("A + B <-> 2 B @ 1, 1", [1, 1]),
        ("A -> B @ 1\nB -> C @ 1\nC -> A @ 1", [1, 1, 1]),
    ],
)
def test_conservation_laws(text, row):
    W = conservation_laws(parse_network(text))
    expected = np.array(row, float) / np.linalg.norm(row)
    assert W.shape == (1, len(row))
    assert np.allclose(W[0], expected, atol=1e-14)


def test_conservation_law_count_matches_rank():
    net = parse_network("A + B -> C @ 1")
    W = conservation_laws(net)
    assert W.shape[0] == 3 - np.linalg.matrix_rank(net.stoichiometric_matrix)
    assert np.allclose(W @ net.stoichiometric_matrix, 0.0)
    assert np.allclose(W @ W.T, np.eye(W.shape[0]))


def test_complex_balance_examples():
    for c in (0.1, 1.0, 7.0):
        assert check_complex_balance(parse_network("A <-> B @ 1, 1"), [c, c]).balanced
    rep = check_complex_balance(parse_network("A <-> B @ 2, 1"), [1.0, 1.0])
    assert not rep.balanced
    assert rep.residuals[complexes(parse_network("A <-> B @ 2, 1")).index((1.0, 0.0))] == pytest.approx(1.0)
    assert check_complex_balance(parse_network("A + B <-> 2 B @ 1, 1"), [1.0, 1.0]).balanced
    with pytest.raises(ValueError):
        check_complex_balance(parse_network("A <-> B @ 1, 1"), [1.0, 0.0])


# --- properties --------------------------------------------------------------

coeff = st.sampled_from([0.0, 1.0, 2.0, 1.5])


@st.composite
def networks(draw):
    m = draw(st.integers(1, 3))
    names = ["A", "B", "C"][:m]
    lines = []
    for _ in range(draw(st.integers(1, 3))):
        a = [draw(coeff) for _ in range(m)]
        b = [draw(coeff) for _ in range(m)]
        if a == b:
            b[0] = a[0] + 1.0
        side = lambda c: " + ".join(f"{x:g} {s}" for x, s in zip(c, names) if x) or "0"
        k = draw(st.floats(0.1, 5.0))
        lines.append(f"{side(a)} -> {side(b)} @ {k!r}")
    return parse_network("\n".join(lines))


@settings(max_examples=60, deadline=None)
@given(networks())
def test_round_trip_property(net):
    assert parse_network(format_network(net)) == net


@settings(max_examples=60, deadline=None)
@given(networks(), st.integers(0, 2**31 - 1))
def test_structural_quasi_positivity_property(net, seed):
    rng = np.random.default_rng(seed)
    f = MassAction(net)
    u = rng.uniform(0, 10, size=(net.m, 50))
    for i in range(net.m):
        v = u.copy()
        v[i] = 0.0
        assert np.all(f(v)[i] >= 0.0)


@settings(max_examples=60, deadline=None)
@given(networks(), st.integers(0, 2**31 - 1))
def test_conservation_rows_annihilate_f(net, seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.01, 10, size=(net.m, 50))
    fu = MassAction(net)(u)
    W = conservation_laws(net)
    assert np.all(np.abs(W @ fu) <= 1e-12 * (1 + np.abs(fu).max(axis=0)))
