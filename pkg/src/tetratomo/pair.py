"""Two-qubit tomography from joint four-outcome measurements on both qubits.

States are held as real Pauli-basis coefficients ``t[mu, nu]`` with
``rho = (1/4) sum t[mu, nu] sigma_mu (x) sigma_nu`` and ``sigma_0 = 1``.
Joint probabilities ``q[j, k]`` are indexed by the detector of qubit A then
qubit B.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bloch import IDENTITY2, REFERENCE_FRAME, SIGMA, TetraFrame
from .clicks import draw_categorical
from .errors import InvalidProbabilities, NonPhysicalState, NotOrthogonal

PAULI4 = np.concatenate([IDENTITY2[None], SIGMA])
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-9
ORTHOGONALITY_TOL = 1e-3


@dataclass(frozen=True)
class TwoQubitState:
    """Two-qubit density operator in Pauli-coefficient form, ``t[0, 0] = 1``."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        if t.shape != (4, 4):
            raise NonPhysicalState(f"expected 4x4 Pauli coefficients, got {t.shape}")
        if abs(t[0, 0] - 1.0) > HERMITIAN_TOL:
            raise NonPhysicalState(f"unit trace requires t[0,0] = 1, got {t[0, 0]!r}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @property
    def matrix(self):
        return 0.25 * np.einsum("mn,mab,ncd->acbd", self.t, PAULI4, PAULI4).reshape(4, 4)

    @classmethod
    def from_matrix(cls, rho, tol=HERMITIAN_TOL):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise NonPhysicalState(f"expected a 4x4 matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise NonPhysicalState("matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise NonPhysicalState(f"trace is {np.trace(rho).real!r}, not 1")
        r = rho.reshape(2, 2, 2, 2)
        t = np.real(np.einsum("mba,ndc,acbd->mn", PAULI4, PAULI4, r))
        return cls(t)

    @classmethod
    def product(cls, s_a, s_b):
        va = np.concatenate([[1.0], np.asarray(s_a, dtype=float)])
        vb = np.concatenate([[1.0], np.asarray(s_b, dtype=float)])
        return cls(np.outer(va, vb))

    @classmethod
    def singlet(cls):
        return cls(np.diag([1.0, -1.0, -1.0, -1.0]))

    @classmethod
    def random(cls, rng, rank=4):
        """Random density matrix ``G G^+ / Tr`` from a complex Gaussian ``G`` (4 x rank)."""
        g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        return cls.from_matrix(0.5 * (rho + rho.conj().T))

    @property
    def local_a(self):
        """Pauli vector of the reduced state of qubit A."""
        return self.t[1:, 0].copy()

    @property
    def local_b(self):
        return self.t[0, 1:].copy()

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def is_positive(self, tol=POSITIVITY_TOL):
        return bool(self.eigenvalues().min() >= -tol)

    def to_json(self):
        """16 ``[re, im]`` pairs of the density matrix, row-major."""
        return [[float(z.real), float(z.imag)] for z in self.matrix.reshape(-1)]

    @classmethod
    def from_json(cls, pairs):
        z = np.array([complex(re, im) for re, im in pairs]).reshape(4, 4)
        return cls.from_matrix(z)


def _design(frame: TetraFrame, scale=1.0):
    """Rows ``(1, scale * a_j)``."""
    return np.concatenate([np.ones((4, 1)), scale * frame.vectors], axis=1)


def joint_probabilities(rho: TwoQubitState, frame_a=REFERENCE_FRAME, frame_b=REFERENCE_FRAME):
    """``q[j, k] = <P_j (x) Q_k>`` with ``P_j = (1 + a_j.sigma) / 4``."""
    if not isinstance(rho, TwoQubitState):
        rho = TwoQubitState(rho)
    if not rho.is_positive():
        raise NonPhysicalState("state has negative eigenvalues")
    return _design(frame_a) @ rho.t @ _design(frame_b).T / 16.0


def reconstruct_two_qubit(q, frame_a=REFERENCE_FRAME, frame_b=REFERENCE_FRAME):
    """Linear inversion ``rho = sum_jk (6 P_j - 1) q_jk (6 Q_k - 1)``.

    Returns ``(state, positive)``; no positivity is enforced.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (4, 4):
        raise InvalidProbabilities(f"expected 4x4 joint probabilities, got {q.shape}")
    if abs(q.sum() - 1.0) > 1e-9:
        raise InvalidProbabilities(f"joint probabilities sum to {q.sum()!r}, not 1")
    t = _design(frame_a, 3.0).T @ q @ _design(frame_b, 3.0)
    t[0, 0] = 1.0
    state = TwoQubitState(t)
    return state, state.is_positive()


def reconstruct_operator(q, frame_a=REFERENCE_FRAME, frame_b=REFERENCE_FRAME):
    """Dense evaluation of ``sum_jk (6 P_j - 1) q_jk (6 Q_k - 1)`` (independent route)."""
    q = np.asarray(q, dtype=float)
    out = np.zeros((4, 4), dtype=complex)
    for j, a in enumerate(frame_a.vectors):
        A = 1.5 * (IDENTITY2 + np.einsum("i,ijk->jk", a, SIGMA)) - IDENTITY2
        for k, b in enumerate(frame_b.vectors):
            B = 1.5 * (IDENTITY2 + np.einsum("i,ijk->jk", b, SIGMA)) - IDENTITY2
            out += q[j, k] * np.kron(A, B)
    return out


def reconstruction_map(frame_a=REFERENCE_FRAME, frame_b=REFERENCE_FRAME):
    """16 x 16 matrix taking ``vec(q)`` to ``vec(t)``."""
    A = _design(frame_a, 3.0)
    B = _design(frame_b, 3.0)
    return np.kron(A.T, B.T)


def orientation_dyadic(q, frame_a=REFERENCE_FRAME, frame_b=None):
    """Relative orientation ``O`` of two frames from singlet-source joint probabilities.

    ``O = -9 sum_jk a_j q_jk a_k`` built from the vectors of ``frame_a``; if
    ``frame_b`` is given the same sum is taken over its vectors instead.
    """
    q = np.asarray(q, dtype=float)
    v = (frame_a if frame_b is None else frame_b).vectors
    O = -9.0 * v.T @ q @ v
    dev = np.max(np.abs(O @ O.T - np.eye(3)))
    if dev > ORTHOGONALITY_TOL:
        warnings.warn(f"orientation dyadic deviates from orthogonal by {dev:.3g}", NotOrthogonal, stacklevel=2)
    return O


def sample_joint(rho: TwoQubitState, frame_a, frame_b, n_pairs, rng):
    """Counts matrix (4 x 4) for ``n_pairs`` measured pairs."""
    q = joint_probabilities(rho, frame_a, frame_b).reshape(-1)
    idx = draw_categorical(q, rng.random(int(n_pairs)))
    return np.bincount(idx, minlength=16).reshape(4, 4)


def q_to_json(q):
    return [float(x) for x in np.asarray(q, dtype=float).reshape(-1)]


def q_from_json(values):
    q = np.asarray(values, dtype=float)
    if q.size != 16:
        raise InvalidProbabilities(f"expected 16 values, got {q.size}")
    return q.reshape(4, 4)
