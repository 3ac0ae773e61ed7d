"""Measurement strategies: static frames, a pre-measurement split and per-click learning.

Every trial owns one :class:`numpy.random.Generator`.  Within a trial the
draws happen in a fixed order (true state, misalignment azimuth, then the
clicks; per-click learning with random frames alternates each click uniform
with the next random rotation), so a seed pins down the whole trajectory.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bloch import (
    REFERENCE_FRAME,
    REFERENCE_QUARTET,
    TetraFrame,
    align_frame,
    as_pauli,
    minimal_rotation,
    random_rotation,
    random_state,
)
from .clicks import draw_categorical, make_rng, misalign, sample_clicks, trial_seed
from .errors import ConfigError, DomainError
from .estimation import (
    AUTO,
    FORCE_BOUNDARY,
    SPHERE_TOL,
    Estimate,
    maximize_in_ball,
    maximize_on_sphere,
    ml_estimate_clicks,
    ml_estimate_clicks_batch,
    ml_estimate_four,
    ml_estimate_four_batch,
)
from .metrics import err_pure_generic, uhlmann_fidelity

KINDS = ("static", "premeasure", "selflearn")
ALIGNMENTS = ("parallel", "antiparallel", "random")
CSV_COLUMNS = ("seed", "N", "strategy", "alignment", "angle_deg", "sq_dist", "fidelity")


@dataclass
class StrategyConfig:
    kind: str = "static"
    alignment: str = "parallel"
    N: int = 100
    misalignment_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        errors = {}
        if self.kind not in KINDS:
            errors["kind"] = f"must be one of {KINDS}, got {self.kind!r}"
        if self.alignment not in ALIGNMENTS:
            errors["alignment"] = f"must be one of {ALIGNMENTS}, got {self.alignment!r}"
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            errors["N"] = f"must be an integer >= 1, got {self.N!r}"
        if not self.misalignment_deg >= 0:
            errors["misalignment_deg"] = f"must be >= 0, got {self.misalignment_deg!r}"
        elif self.misalignment_deg and self.kind != "static":
            errors["misalignment_deg"] = "only static runs accept a misalignment"
        if errors:
            raise ConfigError(errors)


@dataclass
class TrialResult:
    estimate: Estimate
    true_state: np.ndarray
    sq_dist: float
    fidelity: float
    clicks_used: int

    def row(self, seed, N, strategy, alignment="", angle_deg=0.0):
        return {
            "seed": seed,
            "N": N,
            "strategy": strategy,
            "alignment": alignment,
            "angle_deg": angle_deg,
            "sq_dist": self.sq_dist,
            "fidelity": self.fidelity,
        }


def fidelity_measure(s, S):
    """Squared Uhlmann fidelity; equals ``(1 + s.S) / 2`` when either state is pure."""
    return uhlmann_fidelity(s, S) ** 2


def _result(est: Estimate, state, used) -> TrialResult:
    s = np.asarray(state, dtype=float)
    return TrialResult(
        estimate=est,
        true_state=s,
        sq_dist=float(np.sum((est.S - s) ** 2)),
        fidelity=float(fidelity_measure(s, est.S)),
        clicks_used=int(used),
    )


def run_static(state, frame: TetraFrame, N, rng, mode=AUTO) -> TrialResult:
    """Fixed-frame baseline: ``N`` clicks, then one four-outcome ML estimate."""
    counts = sample_clicks(state, frame, N, rng)
    return _result(ml_estimate_four(counts, frame, mode), state, N)


def premeasure_frame(direction, frame: TetraFrame = REFERENCE_FRAME, tol=1e-12):
    """Frame with vector 0 pointing against ``direction``; ``frame`` if the direction is zero."""
    if np.linalg.norm(direction) <= tol:
        return frame
    return align_frame(direction, index=0, anti=True, frame=frame)


def run_premeasure(state, N, rng, mode=AUTO) -> TrialResult:
    """Split strategy: half the qubits locate the state, the rest measure it anti-aligned.

    Only the second half enters the returned estimate.
    """
    if N < 2:
        raise ValueError("the split strategy needs N >= 2")
    n1 = N // 2
    first = ml_estimate_four(sample_clicks(state, REFERENCE_FRAME, n1, rng), REFERENCE_FRAME, AUTO)
    frame = premeasure_frame(first.S)
    counts = sample_clicks(state, frame, N - n1, rng)
    return _result(ml_estimate_four(counts, frame, mode), state, N - n1)


def _batch_summary(states, S, used):
    states = np.asarray(states, dtype=float)
    return {
        "S": S,
        "true_state": states,
        "sq_dist": np.sum((S - states) ** 2, axis=-1),
        "fidelity": fidelity_measure(states, S),
        "clicks_used": np.full(len(states), int(used)),
    }


def _sample_counts(states, vectors, N, rngs):
    counts = np.empty((len(rngs), 4), dtype=np.int64)
    for b, rng in enumerate(rngs):
        p = 0.25 * (1.0 + vectors[b] @ states[b])
        counts[b] = np.bincount(draw_categorical(p, rng.random(int(N))), minlength=4)
    return counts


def run_static_batch(states, frame, N, rngs, mode=AUTO):
    """Vectorized :func:`run_static` over trials; returns a dict of arrays.

    ``frame`` is a :class:`TetraFrame` or per-trial detector vectors (B, 4, 3).
    """
    states = as_pauli(np.atleast_2d(states))
    B = len(rngs)
    vectors = np.broadcast_to(frame.vectors if isinstance(frame, TetraFrame) else frame, (B, 4, 3))
    counts = _sample_counts(states, vectors, N, rngs)
    S = ml_estimate_four_batch(counts, np.ascontiguousarray(vectors), mode)["S"]
    out = _batch_summary(states, S, N)
    out["counts"] = counts
    return out


def run_premeasure_batch(states, N, rngs, mode=AUTO):
    """Vectorized :func:`run_premeasure`; draws per trial match the scalar version."""
    if N < 2:
        raise ValueError("the split strategy needs N >= 2")
    states = as_pauli(np.atleast_2d(states))
    B = len(rngs)
    n1 = N // 2
    ref = np.broadcast_to(REFERENCE_FRAME.vectors, (B, 4, 3))
    first = ml_estimate_four_batch(_sample_counts(states, ref, n1, rngs), REFERENCE_FRAME, AUTO)["S"]
    vectors = np.stack([premeasure_frame(s).vectors for s in first])
    counts = _sample_counts(states, vectors, N - n1, rngs)
    S = ml_estimate_four_batch(counts, vectors, mode)["S"]
    out = _batch_summary(states, S, N - n1)
    out["counts"] = counts
    return out


# --------------------------------------------------------------------------
# per-click learning


def _estimate_clicks_batch(C, previous, mode):
    """ML estimates for a batch of equally long click records ``C`` (B, n, 3)."""
    B, n, _ = C.shape
    W = np.ones((B, n))
    prev = previous
    norm = np.linalg.norm(prev, axis=-1, keepdims=True)
    prev = np.where(norm > 1e-12, prev / np.where(norm > 0, norm, 1.0), C[:, 0])
    # warm start: previous estimate and the click centroid
    centroid = C.sum(axis=1)
    cn = np.linalg.norm(centroid, axis=-1, keepdims=True)
    centroid = np.where(cn > 1e-12, centroid / np.where(cn > 0, cn, 1.0), C[:, -1])
    starts = np.stack([prev, centroid], axis=1)
    s, _, radial = maximize_on_sphere(C, W, starts)
    if mode == AUTO:
        low = np.flatnonzero(radial <= SPHERE_TOL * n)
        if low.size:
            inner, stationary = maximize_in_ball(C[low], W[low])
            s[low[stationary]] = inner[stationary]
    return s


def minimal_rotations(u, v, tol=1e-12):
    """Stack of smallest rotations taking unit ``u[b]`` onto the direction of ``v[b]``.

    Rows with ``|v| <= tol`` get the identity, so the frame is kept.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    B = u.shape[0]
    out = np.broadcast_to(np.eye(3), (B, 3, 3)).copy()
    vn = np.linalg.norm(v, axis=-1)
    keep = vn > tol
    w = v / np.where(keep, vn, 1.0)[:, None]
    axis = np.cross(u, w)
    cos = np.sum(u * w, axis=-1)
    # R = I + K + K^2 / (1 + cos) with K the cross-product matrix of u x w
    K = np.zeros((B, 3, 3))
    K[:, 0, 1], K[:, 0, 2], K[:, 1, 2] = -axis[:, 2], axis[:, 1], -axis[:, 0]
    K -= np.transpose(K, (0, 2, 1))
    regular = keep & (cos > -0.5)
    r = np.flatnonzero(regular)
    out[r] += K[r] + (K[r] @ K[r]) / (1.0 + cos[r])[:, None, None]
    for b in np.flatnonzero(keep & ~regular):
        out[b] = minimal_rotation(u[b], w[b])
    return out


def selflearning_clicks(states, N, alignment, rngs, pure=True):
    """Click records of lock-step per-click learning for a batch of trials.

    Parameters
    ----------
    states : array (B, 3)
        True Pauli vectors.
    N : int
        Clicks per trial.
    alignment : {"parallel", "antiparallel", "random"}
        Where the designated detector vector points before each click.
    rngs : sequence of Generator
        One stream per trial.
    pure : bool
        Estimate on the sphere (pure inputs) or on the whole ball.

    Returns
    -------
    C : array (B, N, 3)
        Detector vector of every click.  Click ``n`` never depends on later
        clicks, so ``C[:, :n]`` is the record of an ``n``-click run.
    S : array (B, 3)
        Last running estimate (zeros for the random strategy).
    """
    if alignment not in ALIGNMENTS:
        raise ValueError(f"unknown alignment {alignment!r}")
    if N < 1:
        raise ValueError("N must be at least 1")
    states = as_pauli(np.atleast_2d(states))
    B = states.shape[0]
    mode = FORCE_BOUNDARY if pure else AUTO
    # the random strategy interleaves each click uniform with the next rotation;
    # either way the draws of click n never depend on N
    interleave = alignment == "random"
    u = None if interleave else np.stack([rng.random(N) for rng in rngs])
    R = np.broadcast_to(np.eye(3), (B, 3, 3)).copy()
    C = np.empty((B, N, 3))
    S = np.zeros((B, 3))
    sign = 1.0 if alignment == "parallel" else -1.0
    for step in range(N):
        vec = np.einsum("jc,bdc->bjd", REFERENCE_QUARTET, R)
        p = 0.25 * (1.0 + np.einsum("bjc,bc->bj", vec, states))
        us = np.array([rng.random() for rng in rngs]) if interleave else u[:, step]
        for b in range(B):
            C[b, step] = vec[b, draw_categorical(p[b], us[b])]
        if step == N - 1:
            break
        if alignment == "random":
            R = np.stack([random_rotation(rng) for rng in rngs])
            continue
        S = _estimate_clicks_batch(C[:, : step + 1], S, mode)
        R = minimal_rotations(vec[:, 0], sign * S) @ R
    return C, S


def run_selflearning_batch(states, N, alignment, rngs, pure=True):
    """Per-click learning for a batch of trials; one :class:`TrialResult` per trial."""
    states = as_pauli(np.atleast_2d(states))
    C, S = selflearning_clicks(states, N, alignment, rngs, pure)
    previous = None if alignment == "random" or N == 1 else S
    estimates = ml_estimate_clicks_batch(C, FORCE_BOUNDARY if pure else AUTO, previous=previous)
    return [_result(est, states[b], N) for b, est in enumerate(estimates)]


def selflearning_curves(states, checkpoints, alignment, rngs, pure=True):
    """Per-click learning evaluated after each checkpoint number of clicks.

    Returns ``{n: dict of arrays}`` as produced by the batch runners.
    """
    states = as_pauli(np.atleast_2d(states))
    checkpoints = sorted(int(n) for n in checkpoints)
    C, _ = selflearning_clicks(states, checkpoints[-1], alignment, rngs, pure)
    mode = FORCE_BOUNDARY if pure else AUTO
    out = {}
    for n in checkpoints:
        S = np.stack([e.S for e in ml_estimate_clicks_batch(C[:, :n], mode)])
        out[n] = _batch_summary(states, S, n)
    return out


def run_selflearning(state, N, alignment, rng, pure=True) -> TrialResult:
    """Re-orient the frame after every click using the running estimate."""
    return run_selflearning_batch(np.asarray(state)[None], N, alignment, [rng], pure)[0]


# --------------------------------------------------------------------------
# exact two-click benchmark


def sphere_quadrature(order):
    """Gauss-Legendre in ``cos(theta)`` times a uniform azimuth grid; weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(order)
    phi = 2.0 * np.pi * np.arange(2 * order) / (2 * order)
    ct, ph = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1.0 - ct**2)
    pts = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
    weights = np.repeat(w / 2.0, 2 * order) / (2 * order)
    return pts, weights


def ball_quadrature(order):
    """Product rule for the uniform measure on the unit ball; weights sum to 1."""
    pts, w = sphere_quadrature(order)
    r, wr = np.polynomial.legendre.leggauss(order)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr * 3.0 * r**2
    return (r[:, None, None] * pts[None]).reshape(-1, 3), (wr[:, None] * w[None]).reshape(-1)


def two_click_estimates(strategy):
    """Estimates and second-frame vectors for every ordered pair of clicks.

    Returns ``(S, second)`` with ``S[j, k]`` the ML estimate after detector
    ``j`` then detector ``k`` and ``second[j]`` the frame used for the second
    click after the first click hit ``j``.
    """
    a = REFERENCE_QUARTET
    if strategy == "nonadaptive":
        second = np.broadcast_to(a, (4, 4, 3))
    elif strategy == "antialign":
        # the single-click estimate is a_j; point a detector against it
        second = np.stack([premeasure_frame(a[j]).vectors for j in range(4)])
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    S = np.empty((4, 4, 3))
    for j, k in itertools.product(range(4), repeat=2):
        S[j, k] = ml_estimate_clicks(np.stack([a[j], second[j, k]]), mode=AUTO).S
    return S, second


def two_qubit_exhaustive(strategy, average_over="pure", order=12):
    """Exact mean ``|S - s|^2`` after two clicks, averaged over pure or ball inputs."""
    if average_over == "pure":
        pts, w = sphere_quadrature(order)
    elif average_over == "ball":
        pts, w = ball_quadrature(order)
    else:
        raise ValueError(f"unknown average {average_over!r}")
    S, second = two_click_estimates(strategy)
    p1 = 0.25 * (1.0 + pts @ REFERENCE_QUARTET.T)
    total = np.zeros(len(pts))
    for j, k in itertools.product(range(4), repeat=2):
        p2 = 0.25 * (1.0 + pts @ second[j, k])
        total += p1[:, j] * p2 * np.sum((S[j, k] - pts) ** 2, axis=-1)
    return float(w @ total)


# --------------------------------------------------------------------------
# misaligned static frames


def misalignment_trials(alignment, angle_deg, N, trials, seed, index=0):
    """Static aligned or anti-aligned runs with a frame tilted by ``angle_deg``.

    Trial ``t`` draws a random pure state, then the tilt azimuth, then its
    clicks from the stream seeded ``seed + t``; estimation is forced onto the
    sphere.  Returns per-trial rows.
    """
    if alignment not in ("parallel", "antiparallel"):
        raise ValueError(f"unknown alignment {alignment!r}")
    if angle_deg < 0:
        raise ValueError("angles must be non-negative")
    states = np.empty((trials, 3))
    vectors = np.empty((trials, 4, 3))
    counts = np.empty((trials, 4), dtype=np.int64)
    seeds = [trial_seed(seed, t) for t in range(trials)]
    for t, sd in enumerate(seeds):
        rng = make_rng(sd)
        s = random_state("pure", rng)
        frame = align_frame(s, index=index, anti=alignment == "antiparallel")
        frame = misalign(frame, np.deg2rad(angle_deg), rng, index=index)
        states[t] = s
        vectors[t] = frame.vectors
        counts[t] = sample_clicks(s, frame, N, rng).n
    est = ml_estimate_four_batch(counts, vectors, FORCE_BOUNDARY)
    S = est["S"]
    sq = np.sum((S - states) ** 2, axis=-1)
    fid = fidelity_measure(states, S)
    p = 0.25 * (1.0 + np.einsum("bjc,bc->bj", vectors, states))
    rows = []
    for t, sd in enumerate(seeds):
        try:
            generic = float(err_pure_generic(p[t], N))
        except DomainError:
            generic = None
        rows.append(
            {
                "seed": sd,
                "N": N,
                "strategy": "static",
                "alignment": alignment,
                "angle_deg": float(angle_deg),
                "sq_dist": float(sq[t]),
                "fidelity": float(fid[t]),
                # large-N prediction for this orientation; None when kappa = 0
                "err_generic": generic,
            }
        )
    return rows


def misalignment_sweep(alignment, angles_deg, N, trials, seed):
    """Mean ``1 - F`` for each misalignment angle (degrees)."""
    out = []
    for angle in angles_deg:
        rows = misalignment_trials(alignment, angle, N, trials, seed)
        out.append(float(np.mean([1.0 - r["fidelity"] for r in rows])))
    return np.array(out)
