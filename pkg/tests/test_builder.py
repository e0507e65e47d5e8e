import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frqi import builder as B
from frqi.circuit import Circuit, Kind, gate_counts, unitary_of
from frqi.simulator import data_distribution, exact_probabilities, marginalize

import oracles


def _abs_unitary(gates, n):
    return np.abs(unitary_of(Circuit(n, gates)))


# relative-phase Toffolis -----------------------------------------------------

def test_rccx_magnitudes_match_toffoli():
    want = np.abs(oracles.controlled(oracles.X, [0, 1], 2, 3))
    assert np.abs(_abs_unitary(B.decompose_rccx(), 3) - want).max() < 1e-12
    assert gate_counts(B.decompose_rccx())["CX"] == 3


def test_rcccx_magnitudes_match_c3x():
    want = np.abs(oracles.controlled(oracles.X, [0, 1, 2], 3, 4))
    assert np.abs(_abs_unitary(B.decompose_rcccx(), 4) - want).max() < 1e-12
    assert gate_counts(B.decompose_rcccx())["CX"] == 6


def test_naive_decompositions_are_exact():
    u = oracles.circuit_unitary(B.naive_toffoli(), 3)
    assert oracles.equal_up_to_phase(u, oracles.controlled(oracles.X, [0, 1], 2, 3), 1e-12)
    u = oracles.circuit_unitary(B.naive_c3x(), 4)
    assert oracles.equal_up_to_phase(u, oracles.controlled(oracles.X, [0, 1, 2], 3, 4), 1e-12)
    assert gate_counts(B.naive_toffoli())["CX"] == 6
    assert gate_counts(B.naive_c3x())["CX"] == 14


def test_rccx_is_not_exact_toffoli():
    u = oracles.circuit_unitary(
        [g for g in B.decompose_rccx()], 3)
    assert not oracles.equal_up_to_phase(u, oracles.controlled(oracles.X, [0, 1], 2, 3), 1e-6)


# MARY ------------------------------------------------------------------------

def test_mary3_sequence():
    g = 0.8
    seq = [(str(x.kind), x.qubits, x.params) for x in B.decompose_mary(3, g)]
    a = g / 4
    assert seq == [
        ("Ry", (2,), (a,)), ("CX", (1, 2), ()), ("Ry", (2,), (-a,)), ("CX", (0, 2), ()),
        ("Ry", (2,), (a,)), ("CX", (1, 2), ()), ("Ry", (2,), (-a,)), ("CX", (0, 2), ()),
    ]


@pytest.mark.parametrize("arity", [3, 5, 7, 8, 9, 10])
@given(gamma=st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False))
@settings(max_examples=5, deadline=None)
def test_mary_magnitudes_match_mcry(arity, gamma):
    want = np.abs(oracles.controlled(oracles.RY(gamma), list(range(arity - 1)), arity - 1, arity))
    got = _abs_unitary(B.decompose_mary(arity, gamma), arity)
    assert np.abs(got - want).max() < 1e-12


def test_mary_on_permuted_qubits():
    qs = (4, 0, 3, 1, 2)
    want = np.abs(oracles.controlled(oracles.RY(1.1), list(qs[:-1]), qs[-1], 5))
    assert np.abs(_abs_unitary(B.decompose_mary(5, 1.1, qs), 5) - want).max() < 1e-12


@pytest.mark.parametrize("arity", [2, 4, 6, 11])
def test_mary_rejects_other_arities(arity):
    with pytest.raises(B.UnsupportedArity):
        B.decompose_mary(arity, 0.1)


def test_mary_line_groups_golden():
    assert {k: B.mary_line_groups(k) for k in (2, 4, 6, 7, 8, 9)} == {
        2: (1, 1), 4: (2, 2), 6: (1, 2, 3), 7: (1, 3, 3), 8: (2, 3, 3), 9: (1, 2, 3, 3),
    }


# AND scaffolding -------------------------------------------------------------

@pytest.mark.parametrize("m", range(1, 8))
def test_and_into_is_a_relative_phase_and(m):
    controls = list(range(m))
    target = m
    pool = list(range(m + 2))  # one spare qubit beyond the target
    n = m + 2
    gates = B.and_into(controls, target, pool)
    mag = _abs_unitary(gates, n)
    for src in range(2 ** n):
        col = mag[:, src]
        dst = int(np.argmax(col))
        assert abs(col[dst] - 1) < 1e-12
        flip = all(src >> c & 1 for c in controls)
        assert dst == src ^ ((1 << target) if flip else 0)


def test_and_cost_golden():
    assert {m: B._and_plan(m)[0] for m in range(2, 11)} == {
        2: 3, 3: 6, 4: 18, 5: 24, 6: 48, 7: 60, 8: 84, 9: 96, 10: 144,
    }


def test_and_into_needs_workspace():
    with pytest.raises(B.TooLarge):
        B.and_into([0, 1, 2, 3], 4, [0, 1, 2, 3, 4])


# layouts ---------------------------------------------------------------------

@pytest.mark.parametrize("n, arity, anc", [
    (1, 3, 0), (2, 5, 0), (3, 7, 0), (4, 9, 0), (5, 8, 1), (6, 8, 1), (7, 9, 1), (8, 10, 1),
    (9, 10, 1), (13, 10, 3),
])
def test_layout_budget(n, arity, anc):
    p = B.plan_layout(n)
    assert (p.mary_arity, p.num_ancilla) == (arity, anc)
    assert p.num_qubits == 2 * n + anc + 1
    assert len(p.mary_controls) == arity - 1
    covered = sorted(p.low_positions + sum(p.ancilla_groups, ()))
    assert covered == list(range(2 * n))


def test_layout_rejects_large_n():
    with pytest.raises(B.TooLarge):
        B.plan_layout(14)


# full circuits ---------------------------------------------------------------

def _x_pattern_before_rotations(c):
    """X state of position qubits at each rotation, tracking only X gates."""
    pos = set(c.positions)
    state = 0
    out = []
    for g in c.gates:
        if g.kind is Kind.X and g.qubits[0] in pos:
            state ^= 1 << g.qubits[0]
        elif g.kind in (Kind.MCRY, Kind.MARY):
            out.append(state)
    return out, state


@pytest.mark.parametrize("build", [B.build_mcry_circuit, B.build_mary_circuit])
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_addressing_invariant(build, n):
    thetas = np.linspace(0, math.pi / 2, 4 ** n)
    c = build(thetas)
    pats, final = _x_pattern_before_rotations(c)
    full = (1 << 2 * n) - 1
    assert pats == [~i & full for i in range(4 ** n)]
    assert final == pats[-1]  # no trailing X after the last pixel
    assert sum(g.kind is Kind.H for g in c.gates) == 2 * n


@pytest.mark.parametrize("build", [B.build_mcry_circuit, B.build_mary_circuit])
@given(n=st.integers(1, 3), data=st.data())
@settings(max_examples=8, deadline=None)
def test_exact_distribution_matches_frqi_state(build, n, data):
    thetas = data.draw(st.lists(st.floats(0, math.pi / 2), min_size=4 ** n, max_size=4 ** n))
    c = build(thetas)
    dist = data_distribution(c, exact_probabilities(c))
    assert np.abs(dist - oracles.frqi_distribution(thetas)).max() < 1e-10


def test_full_addressing_matches_transition():
    thetas = np.random.default_rng(3).uniform(0, math.pi / 2, 16)
    for build in (B.build_mcry_circuit, B.build_mary_circuit):
        a = exact_probabilities(build(thetas))
        b = exact_probabilities(build(thetas, addressing="full"))
        assert np.abs(a - b).max() < 1e-12


def test_ancillas_return_to_zero():
    thetas = np.random.default_rng(4).uniform(0, math.pi / 2, 4 ** 5)
    c = B.build_mary_circuit(thetas)
    assert c.ancillas == (10,)
    p = exact_probabilities(c)
    anc = marginalize(p, c.num_qubits, c.ancillas)
    assert anc[0] > 1 - 1e-10


@pytest.mark.parametrize("n", [5, 6])
def test_single_angle_circuit(n):
    idx, theta = 37, 0.9
    c = B.build_mary_single_angle(n, idx, theta)
    dist = data_distribution(c, exact_probabilities(c))
    thetas = np.zeros(4 ** n)
    thetas[idx] = theta
    assert np.abs(dist - oracles.frqi_distribution(thetas)).max() < 1e-12


def test_single_angle_n13_constructs():
    c = B.build_mary_single_angle(13, 12345, 0.3)
    assert c.num_qubits == 30 and len(c.ancillas) == 3
    c.validate()


@pytest.mark.parametrize("thetas", [[0.1] * 3, [0.1] * 8, [0.1, 0.2, 0.3, 2.0], [0.1]])
def test_builders_reject_bad_angles(thetas):
    with pytest.raises(B.CircuitError):
        B.build_mcry_circuit(thetas)


def test_builder_size_limits():
    big = np.zeros(4 ** 9)
    with pytest.raises(B.TooLarge):
        B.build_mcry_circuit(big)
    with pytest.raises(B.TooLarge):
        B.build_mary_circuit(big, max_n=8)


def test_build_circuit_dispatch():
    assert B.build_circuit("mary", [0.1] * 4).num_qubits == 3
    with pytest.raises(B.CircuitError):
        B.build_circuit("other", [0.1] * 4)
