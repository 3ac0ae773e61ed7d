import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import trace_probabilities
from tetratomo.bloch import (
    REFERENCE_FRAME,
    REFERENCE_QUARTET,
    STANDARD_SIX,
    SixFrame,
    TetraFrame,
    align_frame,
    as_pauli,
    density_matrix,
    length_from_probabilities,
    minimal_rotation,
    outcome_probabilities,
    pauli_from_density,
    random_rotation,
    random_state,
    reconstruct_pauli,
    rotation_matrix,
    six_state_probabilities,
)
from tetratomo.errors import InvalidProbabilities, NonPhysicalState, ZeroAxis

coord = st.floats(-1, 1, allow_nan=False)
vec3 = st.tuples(coord, coord, coord).map(np.array)
ball = vec3.filter(lambda v: v @ v <= 1.0)
unit = vec3.filter(lambda v: v @ v > 1e-4).map(lambda v: v / np.linalg.norm(v))


def test_reference_quartet_geometry():
    a = REFERENCE_QUARTET
    assert np.allclose(a @ a.T, 4 / 3 * np.eye(4) - 1 / 3, atol=1e-15)
    assert np.allclose(a.sum(0), 0, atol=1e-15)
    assert np.allclose(0.75 * a.T @ a, np.eye(3), atol=1e-15)
    assert REFERENCE_FRAME.check()


@settings(max_examples=60, deadline=None)
@given(ball)
def test_probabilities_match_trace_rule(s):
    assert np.allclose(outcome_probabilities(s), trace_probabilities(s, REFERENCE_QUARTET), atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(ball, st.integers(0, 10**6))
def test_inversion_roundtrip_rotated_frame(s, seed):
    frame = TetraFrame(random_rotation(np.random.default_rng(seed)))
    assert frame.check(1e-12)
    p = outcome_probabilities(s, frame)
    assert np.all(p >= -1e-15) and abs(p.sum() - 1) < 1e-14
    assert np.allclose(reconstruct_pauli(p, frame), s, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(ball)
def test_purity_relation(s):
    p = outcome_probabilities(s)
    assert length_from_probabilities(p) == pytest.approx(np.linalg.norm(s), abs=1e-7)
    assert np.sum(p**2) == pytest.approx((3 + s @ s) / 12, abs=1e-14)


def test_density_roundtrip():
    s = np.array([0.1, -0.4, 0.3])
    rho = density_matrix(s)
    assert np.allclose(rho, rho.conj().T)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(pauli_from_density(rho), s)


def test_six_state_probabilities():
    s = np.array([0.2, -0.5, 0.4])
    p = six_state_probabilities(s)
    assert np.allclose(p, [(1 + 0.2) / 6, (1 - 0.2) / 6, 0.5 / 6, 1.5 / 6, 1.4 / 6, 0.6 / 6])
    frame = SixFrame(rotation_matrix([1, 2, 3], 0.7))
    assert six_state_probabilities(s, frame).sum() == pytest.approx(1.0)
    assert STANDARD_SIX.vectors.shape == (6, 3)


@settings(max_examples=50, deadline=None)
@given(unit, unit)
def test_minimal_rotation(u, v):
    R = minimal_rotation(u, v)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)
    assert np.allclose(R @ u, v, atol=1e-9)
    # vectors orthogonal to both stay put
    w = np.cross(u, v)
    if np.linalg.norm(w) > 1e-6:
        assert np.allclose(R @ w, w, atol=1e-9)


def test_minimal_rotation_antipodal():
    u = np.array([0.0, 0.0, 1.0])
    R = minimal_rotation(u, -u)
    assert np.allclose(R @ u, -u)


@settings(max_examples=40, deadline=None)
@given(unit, st.integers(0, 3), st.booleans())
def test_align_frame(d, j, anti):
    f = align_frame(d, index=j, anti=anti)
    assert np.allclose(f.vectors[j], -d if anti else d, atol=1e-9)
    assert f.check(1e-10)


def test_align_zero_raises():
    with pytest.raises(ZeroAxis):
        align_frame([0, 0, 0])
    with pytest.raises(ZeroAxis):
        rotation_matrix([0, 0, 0], 1.0)


def test_validation():
    with pytest.raises(NonPhysicalState):
        as_pauli([1, 1, 0])
    with pytest.raises(NonPhysicalState):
        as_pauli([np.nan, 0, 0])
    with pytest.raises(NonPhysicalState):
        as_pauli([1, 0])
    # tolerance at the API boundary
    as_pauli([1 + 5e-10, 0, 0])
    with pytest.raises(InvalidProbabilities):
        reconstruct_pauli([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(InvalidProbabilities):
        reconstruct_pauli([0.5, 0.5])
    with pytest.raises(ValueError):
        TetraFrame(np.diag([1.0, 1.0, -1.0]))


def test_random_state_distribution():
    rng = np.random.default_rng(1)
    pure = random_state("pure", rng, 20000)
    assert np.allclose(np.linalg.norm(pure, axis=1), 1)
    assert np.allclose(pure.mean(0), 0, atol=0.02)
    assert np.allclose(pure.T @ pure / len(pure), np.eye(3) / 3, atol=0.02)
    b = random_state("ball", rng, 20000)
    r = np.linalg.norm(b, axis=1)
    assert r.max() <= 1
    # uniform ball: P(r < 1/2) = 1/8
    assert np.mean(r < 0.5) == pytest.approx(0.125, abs=0.01)
    with pytest.raises(ValueError):
        random_state("cube", rng)


def test_frame_json_roundtrip():
    f = TetraFrame(rotation_matrix([0, 1, 1], 1.1))
    assert TetraFrame.from_json(f.to_json()) == f
