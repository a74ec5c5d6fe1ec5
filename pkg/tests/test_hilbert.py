import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qswap.hilbert import (CompositeSpace, HilbertError, OperatorMatrix, StateVector,
                           ZeroProbabilityBranch, apply, apply_local, basis_state, embed,
                           factor_out, fidelity, insert_subsystem, measure_subsystem,
                           post_select, split_product, subsystem_fidelity, tensor_states,
                           unitarity_error)


def random_state(space, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=space.total) + 1j * rng.normal(size=space.total)
    return StateVector(space, v).normalized()


def random_unitary(d, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return OperatorMatrix(q * (np.diag(r) / abs(np.diag(r))), unitary=True)


SPACE = CompositeSpace((3, 2, 4), ("A", "B", "C"))


def test_space_basics():
    assert SPACE.total == 24
    assert SPACE.index("B") == 1
    assert SPACE.without("B").labels == ("A", "C")
    with pytest.raises(HilbertError):
        CompositeSpace((2, 2), ("A", "A"))
    with pytest.raises(HilbertError):
        CompositeSpace((1,), ("A",))
    with pytest.raises(HilbertError):
        SPACE.index("Z")


def test_row_major_order():
    s = basis_state(SPACE, [1, 0, 3])
    assert np.argmax(abs(s.amps)) == 1 * 8 + 0 * 4 + 3


def test_state_is_read_only():
    s = basis_state(SPACE, [0, 0, 0])
    with pytest.raises(ValueError):
        s.amps[0] = 2


def test_tensor_states_normalizes_and_orders():
    a = StateVector(CompositeSpace((2,), ("A",)), [1, 1])
    b = StateVector(CompositeSpace((2,), ("B",)), [0, 3])
    s = tensor_states([a, b])
    assert s.space.labels == ("A", "B")
    assert np.allclose(s.amps, np.array([0, 1, 0, 1]) / np.sqrt(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(0, 10_000))
def test_apply_local_matches_embedded_operator(k, seed):
    state = random_state(SPACE, seed)
    u = random_unitary(SPACE.dims[k], seed + 1)
    full = apply(embed(u, SPACE, k), state)
    assert np.allclose(apply_local(u, state, [k]).amps, full.amps, atol=1e-12)


def test_apply_local_two_targets_in_any_order():
    state = random_state(SPACE, 3)
    u = random_unitary(12, 4)
    # reference: permute axes so (A, C) are adjacent, apply, permute back
    t = np.transpose(state.tensor, (0, 2, 1)).reshape(12, 2)
    want = (u.entries @ t).reshape(3, 4, 2).transpose(0, 2, 1)
    got = apply_local(u, state, ["A", "C"])
    assert np.allclose(got.tensor, want, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2), st.integers(0, 10_000))
def test_measurement_probabilities_sum_to_one(k, seed):
    state = random_state(SPACE, seed)
    outcomes = measure_subsystem(state, k)
    assert abs(sum(p for _, p, _ in outcomes) - 1) < 1e-12
    for level, p, post in outcomes:
        assert abs(post.norm() - 1) < 1e-12
        q, sel = post_select(state, k, level)
        assert abs(q - p) < 1e-14
        assert fidelity(sel, post) > 1 - 1e-12


def test_dust_outcomes_are_dropped():
    amps = np.zeros(4, dtype=complex)
    amps[0], amps[2] = 1.0, 1e-8
    state = StateVector(CompositeSpace((2, 2), ("A", "B")), amps).normalized()
    assert [lv for lv, _, _ in measure_subsystem(state, "A")] == ["0"]
    with pytest.raises(ZeroProbabilityBranch):
        post_select(state, "A", 1)


def test_subsystem_fidelity_on_product():
    a = random_state(CompositeSpace((3,), ("A",)), 1)
    b = random_state(CompositeSpace((2,), ("B",)), 2)
    c = random_state(CompositeSpace((4,), ("C",)), 3)
    s = tensor_states([a, b, c])
    assert abs(subsystem_fidelity(s, ["C", "A"], tensor_states([c, a])) - 1) < 1e-12


def test_split_and_insert_round_trip():
    rest = random_state(CompositeSpace((3, 2), ("A", "B")), 5)
    part = random_state(CompositeSpace((4,), ("C",)), 6)
    s = insert_subsystem(rest, part, 1)
    assert s.space.labels == ("A", "C", "B")
    r2, p2 = split_product(s, "C")
    assert fidelity(r2, rest) > 1 - 1e-12 and fidelity(p2, part) > 1 - 1e-12
    with pytest.raises(HilbertError):
        split_product(random_state(SPACE, 9), "C")


def test_factor_out():
    s = tensor_states([basis_state(CompositeSpace((3,), ("A",)), [2]),
                       random_state(CompositeSpace((2,), ("B",)), 1)])
    assert factor_out(s, "A").space.labels == ("B",)
    with pytest.raises(HilbertError):
        factor_out(random_state(SPACE, 2), "A")


def test_unitarity_error():
    assert unitarity_error(random_unitary(5, 0)) < 1e-12
    assert unitarity_error(OperatorMatrix(np.diag([1, 2]))) == pytest.approx(3)
