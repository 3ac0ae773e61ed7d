import numpy as np
import pytest

from tetratomo.adaptive import (
    StrategyConfig,
    ball_quadrature,
    fidelity_measure,
    minimal_rotations,
    misalignment_trials,
    premeasure_frame,
    run_premeasure,
    run_premeasure_batch,
    run_selflearning,
    run_selflearning_batch,
    run_static,
    run_static_batch,
    selflearning_clicks,
    selflearning_curves,
    sphere_quadrature,
    two_click_estimates,
    two_qubit_exhaustive,
)
from tetratomo.bloch import REFERENCE_FRAME, REFERENCE_QUARTET, align_frame, minimal_rotation, random_state
from tetratomo.clicks import make_rng
from tetratomo.errors import ConfigError
from tetratomo.estimation import AUTO, FORCE_BOUNDARY, ml_estimate_four

EXACT = {
    ("nonadaptive", "pure"): (5 - np.sqrt(3)) / 3,
    ("antialign", "pure"): (11 - np.sqrt(24)) / 6,
    ("nonadaptive", "ball"): (7 - np.sqrt(3)) / 5,
    ("antialign", "ball"): (7 - np.sqrt(6)) / 5,
}


def test_strategy_config_validation():
    StrategyConfig("premeasure", "parallel", 10)
    with pytest.raises(ConfigError) as exc:
        StrategyConfig("zigzag", "sideways", 0, -1.0)
    assert set(exc.value.errors) == {"kind", "alignment", "N", "misalignment_deg"}
    with pytest.raises(ConfigError):
        StrategyConfig("selflearn", "parallel", 10, 1.0)


def test_fidelity_measure_pure():
    s = np.array([0.0, 0.6, 0.8])
    S = np.array([0.3, 0.3, 0.1])
    assert fidelity_measure(s, S) == pytest.approx((1 + s @ S) / 2, abs=1e-7)


def test_static_batch_matches_scalar():
    rng = np.random.default_rng(0)
    states = random_state("ball", rng, 12)
    frame = align_frame([1, 0, 0])
    rngs = [make_rng(100 + i) for i in range(12)]
    batch = run_static_batch(states, frame, 50, rngs)
    for i in range(12):
        r = run_static(states[i], frame, 50, make_rng(100 + i))
        assert np.allclose(r.estimate.S, batch["S"][i], atol=1e-12)
        assert r.sq_dist == pytest.approx(batch["sq_dist"][i])


def test_premeasure_batch_matches_scalar():
    states = random_state("pure", np.random.default_rng(1), 8)
    batch = run_premeasure_batch(states, 40, [make_rng(i) for i in range(8)], FORCE_BOUNDARY)
    for i in range(8):
        r = run_premeasure(states[i], 40, make_rng(i), FORCE_BOUNDARY)
        assert np.allclose(r.estimate.S, batch["S"][i], atol=1e-12)
        assert r.clicks_used == 20
    with pytest.raises(ValueError):
        run_premeasure(states[0], 1, make_rng(0))


def test_premeasure_frame():
    d = np.array([0.2, -0.4, 0.1])
    f = premeasure_frame(d)
    assert np.allclose(f.vectors[0], -d / np.linalg.norm(d))
    assert premeasure_frame(np.zeros(3)) == REFERENCE_FRAME


def test_minimal_rotations_match_scalar():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(30, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = rng.normal(size=(30, 3))
    v[0] = -u[0] * 2.0  # antipodal
    v[1] = u[1] * 0.5  # already aligned
    v[2] = 0.0  # keep the frame
    R = minimal_rotations(u, v)
    for b in range(30):
        if b == 2:
            assert np.allclose(R[b], np.eye(3))
            continue
        w = v[b] / np.linalg.norm(v[b])
        assert np.allclose(R[b] @ u[b], w, atol=1e-12)
        assert np.allclose(R[b] @ R[b].T, np.eye(3), atol=1e-12)
        if b != 0:
            assert np.allclose(R[b], minimal_rotation(u[b], w), atol=1e-10)


@pytest.mark.parametrize("alignment", ["parallel", "antiparallel", "random"])
def test_selflearning_prefix_property(alignment):
    states = random_state("pure", np.random.default_rng(3), 4)
    C_long, _ = selflearning_clicks(states, 12, alignment, [make_rng(i) for i in range(4)])
    C_short, _ = selflearning_clicks(states, 7, alignment, [make_rng(i) for i in range(4)])
    assert np.array_equal(C_long[:, :7], C_short)
    assert np.allclose(np.linalg.norm(C_long, axis=-1), 1.0)


def test_selflearning_steers_designated_detector():
    s = np.array([0.0, 0.0, 1.0])
    C, S = selflearning_clicks(s[None], 30, "parallel", [make_rng(5)])
    # with many clicks the running estimate is close to s and most clicks are the aligned detector
    assert S[0] @ s > 0.8
    assert np.mean(C[0, 10:] @ s > 0.9) > 0.3


def test_selflearning_scalar_and_batch_agree():
    states = random_state("pure", np.random.default_rng(6), 3)
    batch = run_selflearning_batch(states, 10, "parallel", [make_rng(i) for i in range(3)])
    for i in range(3):
        r = run_selflearning(states[i], 10, "parallel", make_rng(i))
        assert np.allclose(r.estimate.S, batch[i].estimate.S, atol=1e-10)
        assert np.linalg.norm(r.estimate.S) == pytest.approx(1.0)
    mixed = run_selflearning_batch(0.5 * states, 10, "random", [make_rng(i) for i in range(3)], pure=False)
    assert all(np.linalg.norm(r.estimate.S) <= 1 + 1e-12 for r in mixed)


def test_selflearning_curves_endpoints():
    states = random_state("pure", np.random.default_rng(7), 5)
    curves = selflearning_curves(states, [3, 8], "parallel", [make_rng(i) for i in range(5)])
    final = run_selflearning_batch(states, 8, "parallel", [make_rng(i) for i in range(5)])
    assert np.allclose(curves[8]["fidelity"], [r.fidelity for r in final], atol=1e-9)
    assert set(curves) == {3, 8}


def test_selflearning_rejects_bad_input():
    with pytest.raises(ValueError):
        selflearning_clicks(np.zeros((1, 3)), 5, "sideways", [make_rng(0)])
    with pytest.raises(ValueError):
        selflearning_clicks(np.zeros((1, 3)), 0, "parallel", [make_rng(0)])


def test_quadrature_moments():
    pts, w = sphere_quadrature(8)
    assert w.sum() == pytest.approx(1.0)
    assert w @ pts[:, 2] ** 2 == pytest.approx(1 / 3, abs=1e-14)
    assert w @ (pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(1 / 15, abs=1e-14)
    pts, w = ball_quadrature(8)
    assert w.sum() == pytest.approx(1.0)
    assert w @ np.sum(pts**2, axis=1) == pytest.approx(3 / 5, abs=1e-14)


@pytest.mark.parametrize("key", sorted(EXACT))
def test_two_click_exact_values(key):
    assert two_qubit_exhaustive(*key) == pytest.approx(EXACT[key], abs=1e-8)
    # independent of the quadrature order once it integrates degree 4 exactly
    assert two_qubit_exhaustive(*key, order=20) == pytest.approx(EXACT[key], abs=1e-12)


def test_two_click_estimates_nonadaptive_agree_with_counts():
    S, _ = two_click_estimates("nonadaptive")
    for j in range(4):
        for k in range(4):
            n = np.bincount([j, k], minlength=4)
            assert np.allclose(S[j, k], ml_estimate_four(n, mode=AUTO).S, atol=1e-8)
    with pytest.raises(ValueError):
        two_click_estimates("spiral")


def test_two_click_antialign_repeated_detector_is_minimum_norm():
    S, second = two_click_estimates("antialign")
    for j in range(4):
        assert np.allclose(second[j, 0], -REFERENCE_QUARTET[j])
        assert np.allclose(S[j, 0], 0.0, atol=1e-10)


def test_two_click_monte_carlo_oracle():
    # brute-force simulation of the two-click protocol, nonadaptive, pure inputs
    rng = np.random.default_rng(9)
    S, second = two_click_estimates("nonadaptive")
    s = random_state("pure", rng, 200000)
    p = 0.25 * (1 + s @ REFERENCE_QUARTET.T)
    cdf = np.cumsum(p, axis=1)
    j = (rng.random((len(s), 1)) > cdf).sum(1)
    k = (rng.random((len(s), 1)) > cdf).sum(1)
    err = np.sum((S[j, k] - s) ** 2, axis=1)
    assert err.mean() == pytest.approx(EXACT[("nonadaptive", "pure")], abs=4 * err.std() / np.sqrt(len(s)))


def test_misalignment_rows():
    rows = misalignment_trials("antiparallel", 0.0, 200, 5, 11)
    assert [r["seed"] for r in rows] == [11, 12, 13, 14, 15]
    assert all(r["err_generic"] is None for r in rows)
    rows = misalignment_trials("parallel", 0.0, 200, 5, 11)
    assert all(r["err_generic"] == pytest.approx(1 / 200) for r in rows)
    rows = misalignment_trials("antiparallel", 1.0, 200, 5, 11)
    assert all(r["err_generic"] is not None for r in rows)
    assert all(0 <= r["fidelity"] <= 1 for r in rows)
    with pytest.raises(ValueError):
        misalignment_trials("random", 0.0, 10, 1, 0)
    with pytest.raises(ValueError):
        misalignment_trials("parallel", -1.0, 10, 1, 0)
