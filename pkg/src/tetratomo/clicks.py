"""Synthetic detector-click data.

Clicks are drawn one at a time by inverse-CDF lookup of a uniform variate, so
per-click sequences and tallied counts come from the same stream.  All
randomness flows through explicit :class:`numpy.random.Generator` handles.
Parallel trials use independent streams seeded ``master_seed + trial_index``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import (
    REFERENCE_FRAME,
    STANDARD_SIX,
    SixFrame,
    TetraFrame,
    _perpendicular,
    outcome_probabilities,
    rotation_matrix,
    six_state_probabilities,
)

RNG_ALGORITHM = "PCG64"


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master_seed, trial_index):
    return int(master_seed) + int(trial_index)


@dataclass(frozen=True)
class ClickCounts:
    n: tuple
    N: int
    seed: int | None = None

    def __post_init__(self):
        n = tuple(int(x) for x in self.n)
        if any(x < 0 for x in n):
            raise ValueError("click counts must be non-negative")
        if sum(n) != self.N:
            raise ValueError(f"counts {n} do not add up to N = {self.N}")
        object.__setattr__(self, "n", n)

    @classmethod
    def from_counts(cls, n, seed=None):
        n = tuple(int(x) for x in n)
        return cls(n, sum(n), seed)

    @property
    def array(self):
        return np.array(self.n, dtype=float)

    def to_json(self):
        return {"n": list(self.n), "N": self.N, "seed": self.seed}


def draw_categorical(p, u):
    """Map uniforms ``u`` in [0, 1) onto category indices with probabilities ``p``.

    Zero-probability categories are never returned.
    """
    # rounding can leave an exactly-zero probability slightly negative
    cdf = np.cumsum(np.maximum(np.asarray(p, dtype=float), 0.0))
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def tally(sequence, k=4):
    return np.bincount(np.asarray(sequence, dtype=np.intp), minlength=k)[:k]


def sample_sequence(state, frame: TetraFrame, N, rng):
    """Ordered detector indices (0-based) for ``N`` detected qubits."""
    p = outcome_probabilities(state, frame)
    return draw_categorical(p, rng.random(int(N)))


def sample_clicks(state, frame: TetraFrame, N, rng, seed=None) -> ClickCounts:
    if N < 0:
        raise ValueError("N must be non-negative")
    seq = sample_sequence(state, frame, N, rng)
    return ClickCounts(tuple(tally(seq, 4)), int(N), seed)


def sample_six(state, frame: SixFrame, N, rng, seed=None) -> ClickCounts:
    """Counts ordered x+, x-, y+, y-, z+, z- for the six-outcome device."""
    if N < 0:
        raise ValueError("N must be non-negative")
    p = six_state_probabilities(state, frame)
    seq = draw_categorical(p, rng.random(int(N)))
    return ClickCounts(tuple(tally(seq, 6)), int(N), seed)


def sample_counts_many(state, N, seeds, frame=None, six=False):
    """Counts for many independent trials, one stream per seed; shape ``(len(seeds), k)``.

    ``state`` may be a single Pauli vector or one per trial.
    """
    if frame is None:
        frame = STANDARD_SIX if six else REFERENCE_FRAME
    sampler = sample_six if six else sample_clicks
    state = np.asarray(state, dtype=float)
    seeds = list(seeds)
    out = np.empty((len(seeds), 6 if six else 4), dtype=np.int64)
    for i, seed in enumerate(seeds):
        s = state if state.ndim == 1 else state[i]
        out[i] = sampler(s, frame, N, make_rng(seed)).n
    return out


def misalign(frame: TetraFrame, angle, rng, index=0) -> TetraFrame:
    """Rotate ``frame`` so that vector ``index`` moves by ``angle`` radians.

    The rotation axis is perpendicular to that vector with uniformly random
    azimuth.
    """
    if angle < 0:
        raise ValueError("misalignment angle must be non-negative")
    a = frame.vectors[index]
    e1 = _perpendicular(a)
    e2 = np.cross(a, e1)
    phi = 2.0 * np.pi * rng.random()
    if angle == 0:
        return frame
    axis = np.cos(phi) * e1 + np.sin(phi) * e2
    return frame.rotated(rotation_matrix(axis, angle))
