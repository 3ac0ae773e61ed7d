"""Three-qubit gate network whose ancilla readout realizes the four-outcome measurement.

Wires are ordered ``(A, B, q)``: two ancillas, then the measured qubit, and
the basis index of ``|qA qB q>`` is ``4 qA + 2 qB + q``.  The network

1. prepares the ancillas in ``|00>/sqrt2 + (|01> + |10> + |11>)/sqrt6`` with
   H(alpha) on A, a controlled H(pi/2) from A to B, then H(beta) on A and B;
2. applies sigma_z to q controlled by A and sigma_x to q controlled by B;
3. applies the phase ``|11> -> i |11>`` to the ancillas, so the ``11`` branch
   carries ``i sigma_x sigma_z = sigma_y``;
4. ends with a standard Hadamard on each ancilla.

Reading the ancillas then yields ``00, 01, 10, 11`` with probabilities
``p_1, p_4, p_2, p_3`` of the reference quartet.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .bloch import REFERENCE_QUARTET, SIGMA, as_pauli, density_matrix, pauli_from_density
from .errors import UndefinedPostState

WIRES = ("A", "B", "q")
#: detector index (0-based) heralded by ancilla outcomes 00, 01, 10, 11
OUTCOME_TO_DETECTOR = (0, 3, 1, 2)
POST_STATE_TOL = 1e-12


def generalized_hadamard(phi):
    """Real unitary ``[[cos phi, sin phi], [sin phi, -cos phi]]``."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [s, -c]], dtype=complex)


def preparation_angles():
    """Angles with ``sin(2 alpha) = (sqrt3 - 1)/3`` and ``tan(2 beta) = sqrt3 + 1``."""
    return {
        "alpha": 0.5 * np.arcsin((np.sqrt(3.0) - 1.0) / 3.0),
        "beta": 0.5 * np.arctan(np.sqrt(3.0) + 1.0),
    }


@dataclass(frozen=True)
class GateSpec:
    kind: str
    phi: float | None = None
    target: str | None = None
    control: str | None = None
    targets: tuple | None = None

    def to_json(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items() if v is not None}


def build_network():
    """Ordered gate list: eight generalized-Hadamard type gates and one controlled phase."""
    ang = preparation_angles()
    return [
        GateSpec("generalized-hadamard", ang["alpha"], target="A"),
        GateSpec("controlled-generalized-hadamard", np.pi / 2, target="B", control="A"),
        GateSpec("generalized-hadamard", ang["beta"], target="A"),
        GateSpec("generalized-hadamard", ang["beta"], target="B"),
        GateSpec("controlled-generalized-hadamard", 0.0, target="q", control="A"),
        GateSpec("controlled-generalized-hadamard", np.pi / 2, target="q", control="B"),
        GateSpec("controlled-phase", targets=("A", "B")),
        GateSpec("hadamard", np.pi / 4, target="A"),
        GateSpec("hadamard", np.pi / 4, target="B"),
    ]


def _embed(op, wire):
    mats = [np.eye(2, dtype=complex)] * 3
    mats[WIRES.index(wire)] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def gate_matrix(gate: GateSpec):
    """8 x 8 unitary of one gate on the ``(A, B, q)`` register."""
    if gate.kind in ("generalized-hadamard", "hadamard"):
        return _embed(generalized_hadamard(gate.phi), gate.target)
    if gate.kind == "controlled-generalized-hadamard":
        P1 = np.diag([0.0, 1.0]).astype(complex)
        P0 = np.eye(2, dtype=complex) - P1
        return _embed(P0, gate.control) + _embed(P1, gate.control) @ _embed(
            generalized_hadamard(gate.phi), gate.target
        )
    if gate.kind == "controlled-phase":
        U = np.eye(8, dtype=complex)
        for i in range(8):
            if (i >> 2) & 1 and (i >> 1) & 1:
                U[i, i] = 1j
        return U
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def network_unitary(gates=None):
    U = np.eye(8, dtype=complex)
    for g in build_network() if gates is None else gates:
        U = gate_matrix(g) @ U
    return U


def ancilla_preparation(gates=None):
    """Ancilla amplitudes ``(00, 01, 10, 11)`` after the preparation stage (first four gates)."""
    gates = build_network()[:4] if gates is None else gates
    psi = np.zeros(8, dtype=complex)
    psi[0] = 1.0
    psi = network_unitary(gates) @ psi
    return psi.reshape(4, 2)[:, 0]


def _pure_vector(s):
    """Qubit ket with Pauli vector ``s`` (unit length)."""
    w, v = np.linalg.eigh(density_matrix(s))
    return v[:, np.argmax(w)]


@dataclass
class NetworkResult:
    probabilities: np.ndarray  # ancilla outcomes 00, 01, 10, 11
    post_states: list  # Pauli vectors of q, None where undefined

    def by_detector(self):
        """Probabilities reordered to detectors 0..3 of the reference quartet."""
        out = np.empty(4)
        out[list(OUTCOME_TO_DETECTOR)] = self.probabilities
        return out


def _run_pure(U, ket):
    psi = np.zeros(8, dtype=complex)
    psi[0:2] = ket  # ancillas start in |00>
    out = (U @ psi).reshape(4, 2)
    return out


def run_network(state, strict=False):
    """Simulate the network for a qubit with Pauli vector ``state``.

    Mixed inputs are the eigen-decomposition mixture of two pure runs.  When an
    outcome has probability at most 1e-12 its post state is ``None``, or
    :class:`UndefinedPostState` is raised with ``strict=True``.
    """
    s = as_pauli(state)
    U = network_unitary()
    length = np.linalg.norm(s)
    if length > 1e-15:
        u = s / length
        branches = [(0.5 * (1.0 + length), u), (0.5 * (1.0 - length), -u)]
    else:
        branches = [(0.5, np.array([0.0, 0.0, 1.0])), (0.5, np.array([0.0, 0.0, -1.0]))]
    probs = np.zeros(4)
    rho_q = np.zeros((4, 2, 2), dtype=complex)
    for w, direction in branches:
        if w == 0.0:
            continue
        amp = _run_pure(U, _pure_vector(direction))
        probs += w * np.sum(np.abs(amp) ** 2, axis=1)
        rho_q += w * np.einsum("mi,mj->mij", amp, amp.conj())
    post = []
    for m in range(4):
        if probs[m] <= POST_STATE_TOL:
            if strict:
                raise UndefinedPostState(f"outcome {m:02b} has probability {probs[m]:.3g}")
            post.append(None)
        else:
            post.append(pauli_from_density(rho_q[m] / probs[m]))
    return NetworkResult(probs, post)


def kraus_operators():
    """Effective operators on q for outcomes 00, 01, 10, 11: ``sqrt2 P_j``."""
    U = network_unitary()
    # amplitude of |m> (x) q_out given ancillas |00> and q_in
    block = U.reshape(4, 2, 4, 2)[:, :, 0, :]
    return [block[m] for m in range(4)]


def expected_post_state(state, detector):
    """``2 P_j rho P_j / p_j`` as a Pauli vector, ``P_j = (1 + a_j.sigma) / 4``."""
    a = REFERENCE_QUARTET[detector]
    P = 0.25 * (np.eye(2) + np.einsum("i,ijk->jk", a, SIGMA))
    rho = density_matrix(state)
    out = 2.0 * P @ rho @ P
    return pauli_from_density(out / np.trace(out).real)


def circuit_json():
    """Gate list for documentation, plus the wire order and outcome mapping."""
    return {
        "wires": list(WIRES),
        "basis": "index = 4*qA + 2*qB + q",
        "gates": [g.to_json() for g in build_network()],
        "outcome_to_detector": {f"{m:02b}": d for m, d in enumerate(OUTCOME_TO_DETECTOR)},
        "preparation_angles": preparation_angles(),
    }
