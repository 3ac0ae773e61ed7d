"""Qubit states, measurement frames and Born-rule probabilities.

A qubit state is handled as its Pauli vector ``s`` (a real 3-vector in the
closed unit ball), with ``rho = (1 + s.sigma) / 2``.  Functions accept a single
vector of shape ``(3,)`` or a stack of shape ``(..., 3)``.

Every four-outcome measurement frame is a rotation of the reference quartet
of unit vectors pointing to alternate corners of a cube.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidProbabilities, NonPhysicalState, ZeroAxis

#: Reference quartet, one unit vector per row.
REFERENCE_QUARTET = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / np.sqrt(3.0)

# internal accumulation tolerance vs. tolerance at the public API
BALL_TOL = 1e-12
API_TOL = 1e-9

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
IDENTITY2 = np.eye(2, dtype=complex)


def as_pauli(s, tol=API_TOL):
    """Validate and return ``s`` as a float array of Pauli vectors."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1:] != (3,):
        raise NonPhysicalState(f"Pauli vector must have 3 components, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise NonPhysicalState("Pauli vector has non-finite components")
    length = np.linalg.norm(s, axis=-1)
    if np.any(length > 1.0 + tol):
        raise NonPhysicalState(f"|s| = {np.max(length):.15g} exceeds the Bloch ball")
    return s


def is_pure(s, tol=BALL_TOL):
    return np.abs(np.linalg.norm(np.asarray(s, dtype=float), axis=-1) - 1.0) <= tol


def density_matrix(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * (IDENTITY2 + np.einsum("...i,ijk->...jk", s, SIGMA))


def pauli_from_density(rho):
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("ijk,...kj->...i", SIGMA, rho))


def rotation_matrix(axis, angle):
    """Rodrigues rotation by ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm < 1e-15:
        raise ZeroAxis("rotation axis has zero length")
    k = axis / norm
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def _perpendicular(u):
    u = np.asarray(u, dtype=float)
    e = np.zeros(3)
    e[np.argmin(np.abs(u))] = 1.0
    v = np.cross(u, e)
    return v / np.linalg.norm(v)


def minimal_rotation(u, v):
    """Smallest rotation taking unit vector ``u`` onto unit vector ``v``."""
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    axis = np.cross(u, v)
    sin = np.linalg.norm(axis)
    cos = float(np.clip(u @ v, -1.0, 1.0))
    if sin < 1e-15:
        if cos > 0:
            return np.eye(3)
        return rotation_matrix(_perpendicular(u), np.pi)
    return rotation_matrix(axis, np.arctan2(sin, cos))


def random_rotation(rng):
    """Haar-random rotation matrix from a normalized random quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class TetraFrame:
    """Four-outcome measurement frame: the reference quartet rotated by ``rotation``.

    ``vectors[j]`` is the unit vector of detector ``j`` (0-based).
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    vectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-10) or np.linalg.det(R) < 0:
            raise ValueError("rotation must be a proper orthogonal matrix")
        R.setflags(write=False)
        vectors = REFERENCE_QUARTET @ R.T
        vectors.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "vectors", vectors)

    def __eq__(self, other):
        return isinstance(other, TetraFrame) and np.array_equal(self.rotation, other.rotation)

    def __hash__(self):
        return hash(self.rotation.tobytes())

    def rotated(self, R):
        """Frame obtained by applying the extra rotation ``R`` after this one."""
        return TetraFrame(np.asarray(R, dtype=float) @ self.rotation)

    def check(self, tol=BALL_TOL):
        a = self.vectors
        gram = a @ a.T
        ok = (
            np.allclose(gram, 4.0 / 3.0 * np.eye(4) - 1.0 / 3.0, atol=tol)
            and np.allclose(a.sum(axis=0), 0.0, atol=tol)
            and np.allclose(0.75 * a.T @ a, np.eye(3), atol=tol)
            and np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=tol)
        )
        return bool(ok)

    def to_json(self):
        return [float(x) for x in self.rotation.reshape(-1)]

    @classmethod
    def from_json(cls, values):
        return cls(np.asarray(values, dtype=float).reshape(3, 3))


REFERENCE_FRAME = TetraFrame()


@dataclass(frozen=True)
class SixFrame:
    """Three orthonormal measurement axes, ``axes[i] = rotation @ e_i``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-10):
            raise ValueError("rotation must be an orthogonal 3x3 matrix")
        R.setflags(write=False)
        object.__setattr__(self, "rotation", R)

    @property
    def axes(self):
        return self.rotation.T

    @property
    def vectors(self):
        """The six signed directions in the order x+, x-, y+, y-, z+, z-."""
        ax = self.axes
        return np.stack([ax[0], -ax[0], ax[1], -ax[1], ax[2], -ax[2]])

    def __eq__(self, other):
        return isinstance(other, SixFrame) and np.array_equal(self.rotation, other.rotation)

    def __hash__(self):
        return hash(self.rotation.tobytes())


STANDARD_SIX = SixFrame()


def outcome_probabilities(state, frame: TetraFrame = REFERENCE_FRAME):
    """Detection probabilities ``p_j = (1 + a_j.s) / 4`` for the four detectors."""
    s = as_pauli(state)
    return 0.25 * (1.0 + s @ frame.vectors.T)


def six_state_probabilities(state, frame: SixFrame = STANDARD_SIX):
    """Probabilities ``(1 +- s_xi) / 6`` ordered x+, x-, y+, y-, z+, z-."""
    s = as_pauli(state)
    return (1.0 + s @ frame.vectors.T) / 6.0


def reconstruct_pauli(p, frame: TetraFrame = REFERENCE_FRAME):
    """Linear inversion ``s = 3 sum_j p_j a_j``."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (4,):
        raise InvalidProbabilities(f"expected four probabilities, got shape {p.shape}")
    total = p.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > API_TOL):
        raise InvalidProbabilities(f"probabilities sum to {total!r}, not 1")
    return 3.0 * p @ frame.vectors


def length_from_probabilities(p):
    """Pauli-vector length from the purity relation ``s^2 = 12 sum p^2 - 3``."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(np.maximum(12.0 * np.sum(p * p, axis=-1) - 3.0, 0.0))


def rotate_frame(frame: TetraFrame, axis, angle) -> TetraFrame:
    return frame.rotated(rotation_matrix(axis, angle))


def align_frame(direction, index=0, anti=False, frame: TetraFrame = REFERENCE_FRAME):
    """Rotate ``frame`` minimally so that vector ``index`` points along ``direction``.

    With ``anti=True`` the vector is sent to ``-direction`` instead.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm < 1e-15:
        raise ZeroAxis("cannot align a frame with the zero vector")
    d = -d / norm if anti else d / norm
    return frame.rotated(minimal_rotation(frame.vectors[index], d))


def random_state(kind, rng, size=None):
    """Uniformly distributed pure (``"pure"``) or mixed (``"ball"``) Pauli vectors."""
    shape = (3,) if size is None else (size, 3)
    g = rng.standard_normal(shape)
    s = g / np.linalg.norm(g, axis=-1, keepdims=True)
    if kind == "pure":
        return s
    if kind == "ball":
        r = rng.random(() if size is None else (size, 1)) ** (1.0 / 3.0)
        return s * r
    raise ValueError(f"unknown state kind {kind!r}; expected 'pure' or 'ball'")
