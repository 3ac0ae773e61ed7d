import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import projector
from tetratomo.bloch import REFERENCE_FRAME, TetraFrame, random_rotation, rotation_matrix
from tetratomo.errors import InvalidProbabilities, NonPhysicalState, NotOrthogonal
from tetratomo.pair import (
    TwoQubitState,
    joint_probabilities,
    orientation_dyadic,
    q_from_json,
    q_to_json,
    reconstruct_operator,
    reconstruct_two_qubit,
    reconstruction_map,
    sample_joint,
)


def trace_joint(rho, fa, fb):
    """q_jk = Tr[rho P_j (x) Q_k] with explicit matrices."""
    return np.array(
        [[np.trace(rho @ np.kron(projector(a), projector(b))).real for b in fb.vectors] for a in fa.vectors]
    )


def test_state_roundtrips():
    rho = TwoQubitState.random(np.random.default_rng(0))
    assert np.allclose(TwoQubitState.from_matrix(rho.matrix).t, rho.t)
    assert np.allclose(TwoQubitState.from_json(rho.to_json()).matrix, rho.matrix)
    assert rho.is_positive()
    assert np.trace(rho.matrix).real == pytest.approx(1.0)


def test_product_and_singlet():
    sa, sb = np.array([0.1, 0.2, 0.3]), np.array([0.0, -0.5, 0.5])
    r = TwoQubitState.product(sa, sb)
    assert np.allclose(r.local_a, sa) and np.allclose(r.local_b, sb)
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert np.allclose(TwoQubitState.singlet().matrix, np.outer(singlet, singlet))


def test_invalid_states():
    with pytest.raises(NonPhysicalState):
        TwoQubitState(np.zeros((4, 4)))
    with pytest.raises(NonPhysicalState):
        TwoQubitState.from_matrix(np.eye(4))
    with pytest.raises(NonPhysicalState):
        joint_probabilities(np.diag([1.0, 2.0, 2.0, 2.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_joint_probabilities_match_trace_and_roundtrip(seed, rank):
    rng = np.random.default_rng(seed)
    rho = TwoQubitState.random(rng, rank)
    fa, fb = TetraFrame(random_rotation(rng)), TetraFrame(random_rotation(rng))
    q = joint_probabilities(rho, fa, fb)
    assert np.allclose(q, trace_joint(rho.matrix, fa, fb), atol=1e-14)
    assert q.sum() == pytest.approx(1.0, abs=1e-14)
    back, positive = reconstruct_two_qubit(q, fa, fb)
    assert positive
    assert np.allclose(back.matrix, rho.matrix, atol=1e-12)
    # independent dense route
    assert np.allclose(reconstruct_operator(q, fa, fb), rho.matrix, atol=1e-12)


def test_reconstruction_map_rank():
    M = reconstruction_map()
    assert np.linalg.matrix_rank(M) == 16
    # restricted to perturbations with zero total probability the map has rank 15
    basis = np.eye(16) - 1.0 / 16.0
    assert np.linalg.matrix_rank(M @ basis) == 15
    q = joint_probabilities(TwoQubitState.random(np.random.default_rng(1)))
    assert np.allclose((M @ q.reshape(-1)).reshape(4, 4), reconstruct_two_qubit(q)[0].t)


def test_unnormalized_q_rejected():
    with pytest.raises(InvalidProbabilities):
        reconstruct_two_qubit(np.full((4, 4), 0.1))
    with pytest.raises(InvalidProbabilities):
        reconstruct_two_qubit(np.full((3, 3), 1 / 9))
    with pytest.raises(InvalidProbabilities):
        q_from_json([0.1] * 15)


def test_nonpositive_reconstruction_is_flagged():
    q = np.zeros((4, 4))
    q[0, 0] = 1.0
    state, positive = reconstruct_two_qubit(q)
    assert not positive


def test_orientation_dyadic_exact_both_routes():
    rng = np.random.default_rng(2)
    for _ in range(10):
        R = random_rotation(rng)
        q = joint_probabilities(TwoQubitState.singlet(), REFERENCE_FRAME, TetraFrame(R))
        O_a = orientation_dyadic(q)
        O_b = orientation_dyadic(q, REFERENCE_FRAME, TetraFrame(R))
        assert np.linalg.norm(O_a - R) < 1e-9
        assert np.linalg.norm(O_b - R) < 1e-9


def test_orientation_dyadic_sampled():
    R = rotation_matrix([1, 2, -1], 0.9)
    counts = sample_joint(TwoQubitState.singlet(), REFERENCE_FRAME, TetraFrame(R), 10**6, np.random.default_rng(3))
    assert counts.sum() == 10**6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotOrthogonal)
        O = orientation_dyadic(counts / counts.sum())
    assert np.linalg.norm(O - R) < 0.01


def test_not_orthogonal_warning():
    q = np.full((4, 4), 1 / 16)
    with pytest.warns(NotOrthogonal):
        orientation_dyadic(q)


def test_q_json_roundtrip():
    q = joint_probabilities(TwoQubitState.random(np.random.default_rng(4)))
    assert np.array_equal(q_from_json(q_to_json(q)), q)
