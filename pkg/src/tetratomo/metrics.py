"""Distances, fidelities, Fisher information and closed-form large-N predictions.

The closed forms here are the reference values against which simulated
estimation errors are compared.  All of them are per-ensemble quantities for a
total of ``N`` detected qubits.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from .bloch import (
    REFERENCE_FRAME,
    STANDARD_SIX,
    SixFrame,
    TetraFrame,
    as_pauli,
    outcome_probabilities,
)
from .errors import DomainError, KappaZero, SingularInformation, SmallSampleWarning

ALIGN_TOL = 1e-9


def distances(s1, s2):
    """Trace-class and Hilbert-Schmidt distances; both are ``|s1 - s2| / 2`` for a qubit."""
    s1, s2 = as_pauli(s1), as_pauli(s2)
    d = 0.5 * np.linalg.norm(s1 - s2, axis=-1)
    return {"trace": d, "hilbert_schmidt": d.copy()}


def uhlmann_fidelity(s1, s2):
    """Uhlmann fidelity ``Tr|sqrt(rho1) sqrt(rho2)|`` from the two Pauli vectors."""
    s1, s2 = as_pauli(s1), as_pauli(s2)
    dot = np.sum(s1 * s2, axis=-1)
    cross = np.cross(s1, s2)
    rad = np.sum((s1 + s2) ** 2, axis=-1) - np.sum(cross * cross, axis=-1)
    rad = np.sqrt(np.maximum(rad, 0.0))
    plus = np.sqrt(np.maximum(1.0 + dot + rad, 0.0))
    minus = np.sqrt(np.maximum(1.0 + dot - rad, 0.0))
    return np.clip(0.5 * (plus + minus), 0.0, 1.0)


def pure_fidelity(s, S):
    """``sqrt((1 + s.S) / 2)``, valid when ``s`` is a unit vector."""
    return np.sqrt(np.maximum(0.5 * (1.0 + np.sum(np.asarray(s) * np.asarray(S), axis=-1)), 0.0))


def kappa_squared(p):
    """Orientation cumulant ``2 sum p^3 - 2 (sum p^2)^2``."""
    p = np.asarray(p, dtype=float)
    return 2.0 * np.sum(p**3, axis=-1) - 2.0 * np.sum(p * p, axis=-1) ** 2


def kappa_squared_pairwise(p):
    """Same quantity as :func:`kappa_squared` via ``sum_jk p_j p_k (p_j - p_k)^2``."""
    p = np.asarray(p, dtype=float)
    diff = p[..., :, None] - p[..., None, :]
    return np.einsum("...j,...k,...jk->...", p, p, diff * diff)


def mean_sum_nu_squared(p, N):
    """Multinomial average of ``sum_j nu_j^2`` after ``N`` clicks."""
    p = np.asarray(p, dtype=float)
    return 1.0 / N + (N - 1.0) / N * np.sum(p * p, axis=-1)


def violation_probability(state, frame: TetraFrame = REFERENCE_FRAME, N=1000):
    """Large-N fraction of click records whose frequencies violate the purity bound."""
    p = outcome_probabilities(state, frame)
    k2 = float(kappa_squared(p))
    if k2 <= 1e-15:
        raise KappaZero(
            "kappa = 0: the Gaussian formula does not apply "
            "(exact limits: 1 for anti-aligned pure states, 0 for the mixed state)"
        )
    if N < 100:
        warnings.warn(f"large-N formula evaluated at N = {N}", SmallSampleWarning, stacklevel=2)
    arg = np.sqrt(N) / (2.0 * np.sqrt(k2)) * (mean_sum_nu_squared(p, N) - 1.0 / 3.0)
    return float(0.5 + 0.5 * erf(arg))


# --------------------------------------------------------------------------
# Fisher information


def povm_fisher_information(alpha, beta, state, N=1):
    """Fisher matrix for outcome probabilities ``p_j = alpha_j + beta_j.s``."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    p = alpha + beta @ np.asarray(state, dtype=float)
    if np.any(p <= 1e-15):
        raise SingularInformation("an outcome has zero probability; Fisher matrix is singular")
    return N * np.einsum("j,jx,jy->xy", 1.0 / p, beta, beta)


def fisher_information(state, frame: TetraFrame = REFERENCE_FRAME, N=1):
    """``N sum_j (1/p_j) dp_j/ds dp_j/ds`` with ``dp_j/ds = a_j / 4``."""
    s = as_pauli(state)
    return povm_fisher_information(np.full(4, 0.25), 0.25 * frame.vectors, s, N)


def probability_gradient(frame: TetraFrame = REFERENCE_FRAME):
    """Jacobian ``dp_j/ds_xi``, shape (4, 3)."""
    return 0.25 * np.array(frame.vectors)


def cramer_rao_trace(information):
    """``Sp(I^-1)``: lower bound on the mean squared distance."""
    return float(np.trace(np.linalg.inv(information)))


def rank_one_povm(weights, directions):
    """``(alpha, beta)`` of the POVM ``w_j (1 + b_j.sigma) / 2``."""
    w = np.asarray(weights, dtype=float)
    b = np.asarray(directions, dtype=float)
    return 0.5 * w, 0.5 * w[:, None] * b


def covariance_dyadic(state, frame: TetraFrame = REFERENCE_FRAME):
    """Dyadic ``K = 9 sum_jk a_j (delta_jk p_j - p_j p_k) a_k``; ``N cov(S) -> K``."""
    p = outcome_probabilities(state, frame)
    a = frame.vectors
    return 9.0 * a.T @ (np.diag(p) - np.outer(p, p)) @ a


# --------------------------------------------------------------------------
# closed forms


def msd_generic(s_len, N):
    """Mean squared distance of the frequency estimator, ``(9 - s^2) / N``."""
    return (9.0 - s_len**2) / N


d_opt = msd_generic


def msd_antialigned(N):
    return 2.0 / N


def msd_six(s_len, N):
    return (9.0 - 3.0 * s_len**2) / N


def msd_six_privileged(N):
    return 8.0 / (3.0 * N)


def mean_uhlmann(s_len, k2, N):
    """Large-N mean Uhlmann fidelity for a mixed state of length ``s_len``."""
    if s_len >= 1.0:
        raise DomainError("mean Uhlmann fidelity expansion needs s < 1")
    return 1.0 - (9.0 - s_len**2) / (8.0 * N) - 9.0 * k2 / (N * (1.0 - s_len**2))


def mean_uhlmann_anti(s_len, N):
    """Mean Uhlmann fidelity when ``s`` points opposite a detector vector."""
    return 1.0 - (3.0 + s_len) * (3.0 + 2.0 * s_len) / (8.0 * N * (1.0 + s_len))


def kappa_extremal(s_len, sign=+1):
    """kappa^2 for ``s = +s a_j`` (``sign=+1``) or ``s = -s a_j`` (``sign=-1``)."""
    return (1.0 + sign * s_len) * (3.0 - sign * s_len) * s_len**2 / 72.0


def kappa_saddle(s_len):
    return (3.0 - s_len**2) * s_len**2 / 72.0


def err_pure_generic(p, N):
    """``1 - F`` for pure states estimated on the sphere, any non-anti-aligned orientation."""
    p = np.asarray(p, dtype=float)
    k2 = kappa_squared(p)
    if k2 <= 1e-15:
        raise DomainError("expression requires kappa^2 > 0")
    return 4.0 / N - 2.0 / (9.0 * N * k2) * (27.0 * np.sum(p**4) - 1.0)


def err_pure_generic_alt(p, N):
    """Equivalent form ``2/N - 2/(3 N kappa^2) sum_j ((3 p_j - 1) p_j)^2``."""
    p = np.asarray(p, dtype=float)
    k2 = kappa_squared(p)
    if k2 <= 1e-15:
        raise DomainError("expression requires kappa^2 > 0")
    return 2.0 / N - 2.0 / (3.0 * N * k2) * np.sum(((3.0 * p - 1.0) * p) ** 2)


def err_pure_parallel(N):
    return 1.0 / N


def err_pure_antiparallel(N):
    return 1.0 / (2.0 * N)


def err_pure_limit_kappa0(N):
    return 4.0 / (3.0 * N)


def quantum_limit(N):
    """Smallest ``1 - F`` allowed for any measurement on ``N`` pure copies: ``1/(N+2)``."""
    return 1.0 / (N + 2.0)


def quantum_limit_fidelity(N):
    return (N + 1.0) / (N + 2.0)


def smin_premeasure(delta, N):
    """Minimal estimated length when ``delta`` clicks hit the anti-aligned detector."""
    return 1.0 - 4.0 * delta / N


def orientation(state, frame: TetraFrame = REFERENCE_FRAME, tol=ALIGN_TOL):
    """``("aligned" | "antialigned" | "generic", j)`` for the direction of ``state``."""
    s = np.asarray(state, dtype=float)
    length = np.linalg.norm(s)
    if length < tol:
        return "generic", None
    u = s / length
    for j, a in enumerate(frame.vectors):
        if np.linalg.norm(u - a) <= tol:
            return "aligned", j
        if np.linalg.norm(u + a) <= tol:
            return "antialigned", j
    return "generic", None


def on_six_axis(state, frame: SixFrame = STANDARD_SIX, tol=ALIGN_TOL):
    s = np.asarray(state, dtype=float)
    return bool(np.any(np.abs(np.abs(frame.axes @ s) - 1.0) <= tol))


@dataclass
class PredictionSet:
    """Large-N reference values; ``None`` marks a formula that does not apply."""

    N: float
    s: float
    kappa2: float
    msd_generic: float | None = None
    msd_antialigned: float | None = None
    msd_six: float | None = None
    msd_six_privileged: float | None = None
    d_opt: float | None = None
    mean_uhlmann: float | None = None
    mean_uhlmann_anti: float | None = None
    err_pure_parallel: float | None = None
    err_pure_antiparallel: float | None = None
    err_pure_generic: float | None = None
    err_pure_limit_kappa0: float | None = None
    quantum_limit: float | None = None
    smin_premeasure: float | None = None

    def valid(self, name):
        return getattr(self, name) is not None

    def to_json(self):
        return {k: (None if v is None else float(v)) for k, v in asdict(self).items()}


def predictions(state, frame: TetraFrame = REFERENCE_FRAME, N=1000, six_frame=STANDARD_SIX, delta=1):
    """Evaluate every closed-form prediction that applies to ``state`` in ``frame``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    s = as_pauli(state)
    s_len = float(np.linalg.norm(s))
    pure = abs(s_len - 1.0) <= ALIGN_TOL
    p = outcome_probabilities(s, frame)
    k2 = float(kappa_squared(p))
    kind, _ = orientation(s, frame)
    out = PredictionSet(N=N, s=s_len, kappa2=k2)
    out.msd_generic = msd_generic(s_len, N)
    out.d_opt = d_opt(s_len, N)
    if kind == "antialigned" and pure:
        out.msd_antialigned = msd_antialigned(N)
    if not pure:
        out.msd_six = msd_six(s_len, N)
        out.mean_uhlmann = mean_uhlmann(s_len, k2, N)
        if kind == "antialigned" or s_len < ALIGN_TOL:
            out.mean_uhlmann_anti = mean_uhlmann_anti(s_len, N)
    elif on_six_axis(s, six_frame):
        out.msd_six_privileged = msd_six_privileged(N)
    if pure:
        if kind == "aligned":
            out.err_pure_parallel = err_pure_parallel(N)
        if kind == "antialigned":
            out.err_pure_antiparallel = err_pure_antiparallel(N)
        else:
            out.err_pure_generic = float(err_pure_generic(p, N))
        out.err_pure_limit_kappa0 = err_pure_limit_kappa0(N)
        out.quantum_limit = quantum_limit(N)
        out.smin_premeasure = smin_premeasure(delta, N)
    return out
