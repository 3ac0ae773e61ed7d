import numpy as np
import pytest
from scipy import stats

from tetratomo.bloch import REFERENCE_FRAME, STANDARD_SIX, TetraFrame, outcome_probabilities, rotation_matrix
from tetratomo.clicks import (
    ClickCounts,
    draw_categorical,
    make_rng,
    misalign,
    sample_clicks,
    sample_counts_many,
    sample_sequence,
    sample_six,
    tally,
    trial_seed,
)


def test_counts_validate():
    c = ClickCounts.from_counts([3, 0, 2, 1], seed=7)
    assert c.N == 6 and c.n == (3, 0, 2, 1)
    assert c.to_json() == {"n": [3, 0, 2, 1], "N": 6, "seed": 7}
    with pytest.raises(ValueError):
        ClickCounts((1, 2, 3, 4), 11)
    with pytest.raises(ValueError):
        ClickCounts((-1, 2, 0, 0), 1)


def test_draw_categorical_never_hits_zero_probability():
    u = np.random.default_rng(0).random(10**5)
    idx = draw_categorical([0.5, 0.0, 0.5, -1e-17], u)
    assert set(np.unique(idx)) == {0, 2}


def test_same_seed_same_counts():
    s = [0.3, -0.2, 0.5]
    a = sample_clicks(s, REFERENCE_FRAME, 500, make_rng(42))
    b = sample_clicks(s, REFERENCE_FRAME, 500, make_rng(42))
    assert a == b
    assert trial_seed(10, 3) == 13


def test_sequence_order_and_tally():
    seq = sample_sequence([0, 0, 1], REFERENCE_FRAME, 1000, make_rng(3))
    assert seq.shape == (1000,) and seq.min() >= 0 and seq.max() <= 3
    assert tally(seq).sum() == 1000


def test_multinomial_goodness_of_fit():
    s = np.array([0.6, 0.2, -0.3])
    frame = TetraFrame(rotation_matrix([1, 0, 1], 0.4))
    counts = sample_counts_many(s, 200, range(500), frame=frame).sum(0)
    p = outcome_probabilities(s, frame)
    chi2 = stats.chisquare(counts, p * counts.sum())
    assert chi2.pvalue > 1e-3


def test_six_state_sampling():
    c = sample_six([0, 0, 1], STANDARD_SIX, 3000, make_rng(5))
    assert c.n[5] == 0  # z- has zero probability for the +z state
    assert sum(c.n) == 3000
    many = sample_counts_many([0, 0, 1], 100, range(3), six=True)
    assert many.shape == (3, 6)


def test_misalign_angle():
    rng = make_rng(1)
    for angle in (0.0, 1e-4, 0.3):
        f = misalign(REFERENCE_FRAME, angle, rng, index=2)
        cos = f.vectors[2] @ REFERENCE_FRAME.vectors[2]
        assert np.arccos(np.clip(cos, -1, 1)) == pytest.approx(angle, abs=1e-7)
    with pytest.raises(ValueError):
        misalign(REFERENCE_FRAME, -1.0, rng)


def test_negative_N():
    with pytest.raises(ValueError):
        sample_clicks([0, 0, 0], REFERENCE_FRAME, -1, make_rng(0))
