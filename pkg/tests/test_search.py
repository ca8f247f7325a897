import numpy as np
import pytest

import oracles
from cp3o.divergence import make_scorer
from cp3o.model import Cp3oConfig, GofMetric, Segmentation, TimeSeries, validate_config
from cp3o.search import (
    DpState,
    dp_iterate,
    exhaustive_best_segmentation,
    h_value,
    reconstruct_cps,
    run_cp3o,
    select_num_changes,
)


def step_series():
    return TimeSeries(np.r_[np.zeros(20), np.full(20, 10.0)])


def test_step_series_single_change():
    cfg = Cp3oConfig(K=1, w=5, metric=GofMetric.energy_complete())
    result = run_cp3o(step_series(), cfg)
    assert result.all_segmentations[1] == Segmentation((21,), 40)
    value, seg = exhaustive_best_segmentation(step_series(), GofMetric.energy_complete(), 1, 5)
    assert (value, seg.change_points) == (5.0, (21,))
    assert result.gof_curve[0] == value


@pytest.mark.parametrize("kind, alpha, delta", [
    ("energy-complete", 1.0, None), ("energy", 0.8, 3), ("ks", 1.0, None), ("ks-windowed", 1.0, 4),
])
def test_unpruned_tables_match_brute_force(rng, kind, alpha, delta):
    Z = rng.normal(size=36)
    Z[12:24] += 2.0
    seq = TimeSeries(Z)
    metric = GofMetric(kind, alpha, delta)
    cfg = validate_config(seq, Cp3oConfig(K=3, w=5, metric=metric))
    scorer = make_scorer(cfg.metric, seq)
    state = DpState.initial(seq.T, 3, 5)
    for k in (1, 2, 3):
        dp_iterate(state, scorer, k, 5, prune=False)
    G, A = oracles.unpruned_dp(kind, Z, 3, 5, alpha, delta)
    for t in range(seq.T + 1):
        for k in (1, 2, 3):
            if (t, k) in G:
                assert state.G[t, k] == pytest.approx(G[(t, k)], rel=1e-9)
                assert state.A[t, k] == A[(t, k)]
            else:
                assert state.G[t, k] == -np.inf


def test_h_value_outside_range_is_undefined():
    seq = step_series()
    scorer = make_scorer(GofMetric.ks(), seq)
    state = DpState.initial(seq.T, 2, 5)
    dp_iterate(state, scorer, 1, 5)
    assert h_value(state, scorer, 2, 5, 8, 40) == -np.inf       # below 1 + 2w
    assert h_value(state, scorer, 2, 5, 37, 40) == -np.inf      # above t - w + 1
    assert np.isfinite(h_value(state, scorer, 2, 5, 21, 40))


def test_levels_must_run_in_order():
    seq = step_series()
    state = DpState.initial(seq.T, 2, 5)
    with pytest.raises(ValueError):
        dp_iterate(state, make_scorer(GofMetric.ks(), seq), 2, 5)


def test_reconstruct_rejects_undefined():
    seq = step_series()
    state = DpState.initial(seq.T, 2, 5)
    dp_iterate(state, make_scorer(GofMetric.ks(), seq), 1, 5)
    with pytest.raises(ValueError):
        reconstruct_cps(state, 1, 8)


def test_first_level_searches_full_range():
    seq = TimeSeries(np.random.default_rng(1).normal(size=60))
    result = run_cp3o(seq, Cp3oConfig(K=3, w=6, metric=GofMetric.ks()))
    t = np.arange(seq.T + 1)
    np.testing.assert_array_equal(result.prune_stats[:, 1], np.maximum(t - 2 * 6 + 1, 0) * (t >= 12))


def test_constant_series_is_degenerate():
    result = run_cp3o(TimeSeries(np.ones(60)), Cp3oConfig(K=4, w=5, metric=GofMetric.ks()))
    assert result.degenerate
    assert result.gof_curve == [0.0] * 4


def test_constant_series_keeps_every_legal_candidate():
    w = 5
    result = run_cp3o(TimeSeries(np.ones(60)), Cp3oConfig(K=4, w=w))
    # ties never prune; only positions with no legal k-segmentation before them go
    for t in range(2 * w, 61):
        for k in range(1, 5):
            assert result.prune_stats[t, k] == max(t - (k + 1) * w + 1, 0)


def test_levels_capped_by_length():
    seq = TimeSeries(np.random.default_rng(2).normal(size=40))
    result = run_cp3o(seq, Cp3oConfig(K=6, w=10, metric=GofMetric.ks()))
    assert result.K == 3
    assert set(result.all_segmentations) == {1, 2, 3}


def test_knee_simple():
    assert select_num_changes([1.0, 2.0, 3.0, 3.1, 3.2]) == (3, False)
    assert select_num_changes([1.0, 5.0, 5.1, 5.2, 5.3]) == (2, False)


def test_knee_fallback():
    assert select_num_changes([1.0, 2.0]) == (2, True)
    assert select_num_changes([1.0]) == (1, True)


def test_knee_ties_pick_smallest():
    # a straight line fits every knee perfectly
    assert select_num_changes([1.0, 2.0, 3.0, 4.0, 5.0]) == (2, False)


def test_knee_matches_oracle(rng):
    for _ in range(50):
        y = np.cumsum(rng.exponential(size=rng.integers(3, 9)))
        assert select_num_changes(y)[0] == oracles.knee_oracle(y)


def test_exhaustive_guards():
    seq = TimeSeries(np.zeros(80))
    with pytest.raises(ValueError):
        exhaustive_best_segmentation(seq, GofMetric.ks(), 1, 5)
    with pytest.raises(ValueError):
        exhaustive_best_segmentation(TimeSeries(np.zeros(30)), GofMetric.ks(), 3, 5)
