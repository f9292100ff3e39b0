import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twotier.game import GameError, WeightedVotingGame, shapley_dp
from twotier.pivot import (
    PivotEstimate,
    essential_interval_hit_rate,
    estimate_pivot_probabilities,
    influence_profile,
    l1_from_probabilities,
    pivot_counts,
)
from twotier.population import ConstituencyPartition, DistributionSpec, ModelError, PreferenceModel

IID = PreferenceModel(DistributionSpec.uniform(-0.5, 0.5))


def test_symmetric_game_splits_evenly():
    est = estimate_pivot_probabilities(WeightedVotingGame(0.5, [1] * 5), IID, ConstituencyPartition([3] * 5), 50_000, 1)
    assert est.counts.sum() == 50_000
    np.testing.assert_allclose(est.probabilities, 0.2, atol=4 * 0.2 ** 0.5 * 0.8 ** 0.5 / 50_000 ** 0.5)


def test_dummy_is_never_pivotal():
    est = estimate_pivot_probabilities(WeightedVotingGame(0.5, (1, 2, 2, 2)), IID, ConstituencyPartition([1, 3, 5, 7]), 10_000, 2)
    assert est.counts[0] == 0


def test_weight_scaling_changes_nothing():
    part = ConstituencyPartition([1, 3, 5, 7, 9])
    a = pivot_counts([WeightedVotingGame(0.6, (5, 4, 3, 2, 1))], IID, part, 5000, 3)
    b = pivot_counts([WeightedVotingGame(0.6, (50, 40, 30, 20, 10))], IID, part, 5000, 3)
    c = pivot_counts([WeightedVotingGame(0.6, (0.5, 0.4, 0.3, 0.2, 0.1))], IID, part, 5000, 3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=6).filter(lambda w: sum(w) % 2 == 1), st.integers(0, 1000))
def test_left_and_right_pivots_agree_for_odd_majority(w, seed):
    # with an odd total weight no coalition ties the quota, so both directions find the same player
    game = WeightedVotingGame(0.5, w)
    part = ConstituencyPartition([3] * len(w))
    left = pivot_counts([game], IID, part, 500, seed, direction="left")
    right = pivot_counts([game], IID, part, 500, seed, direction="right")
    np.testing.assert_array_equal(left, right)


def test_thread_count_does_not_change_counts():
    part = ConstituencyPartition([1, 3, 5, 7, 9, 11])
    model = PreferenceModel(DistributionSpec.normal(0, 1), DistributionSpec.uniform(-1, 1), 0.5)
    games = [WeightedVotingGame(0.5, (3, 3, 2, 2, 1, 1)), WeightedVotingGame(2 / 3, (1, 1, 1, 1, 1, 1))]
    one = pivot_counts(games, model, part, 3 * 4096 + 17, 9, threads=1)
    four = pivot_counts(games, model, part, 3 * 4096 + 17, 9, threads=4)
    np.testing.assert_array_equal(one, four)
    assert one.shape == (2, 6)
    assert (one.sum(axis=1) == 3 * 4096 + 17).all()


def test_large_shocks_recover_shapley():
    game = WeightedVotingGame(0.5, (3, 2, 2, 1, 1))
    model = PreferenceModel(DistributionSpec.uniform(-0.5, 0.5), DistributionSpec.normal(0, 1), 1000.0)
    est = estimate_pivot_probabilities(game, model, ConstituencyPartition([3, 5, 7, 9, 11]), 40_000, 4)
    np.testing.assert_allclose(est.probabilities, shapley_dp(game).values, atol=0.01)


def test_mismatched_dimensions():
    with pytest.raises(GameError):
        pivot_counts([WeightedVotingGame(0.5, (1, 1))], IID, ConstituencyPartition([1, 1, 1]), 10, 0)


def test_bad_direction():
    with pytest.raises(ValueError):
        pivot_counts([WeightedVotingGame(0.5, (1,))], IID, ConstituencyPartition([1]), 10, 0, direction="up")


def test_estimate_csv_and_metadata():
    est = estimate_pivot_probabilities(WeightedVotingGame(0.5, (2, 1, 1)), IID, ConstituencyPartition([5, 3, 3]), 100, 0)
    lines = est.to_csv().splitlines()
    assert lines[0] == "constituency,size,weight,pivot_prob,std_err,per_capita"
    assert lines[1].startswith("1,5,2.0,")
    assert est.metadata()["seed"] == 0
    with pytest.raises(ValueError):
        PivotEstimate(np.array([1, 1]), 3, 0, (1, 1), (1, 1), 0.5)


def test_influence_profile_example():
    est = PivotEstimate(np.array([10, 0]), 10, 0, (1.0, 0.0), (3, 5), 0.5)
    prof = influence_profile(est, ConstituencyPartition([3, 5]))
    assert prof.l1_distance == pytest.approx(1.25)
    np.testing.assert_allclose(prof.per_capita, [1 / 3, 0])
    assert l1_from_probabilities(np.array([1.0, 0.0]), np.array([3, 5])) == pytest.approx(1.25)


def test_proportional_influence_has_zero_gap():
    est = PivotEstimate(np.array([3, 5]), 8, 0, (1.0, 1.0), (3, 5), 0.5)
    assert influence_profile(est, ConstituencyPartition([3, 5])).l1_distance == pytest.approx(0.0)


def test_essential_interval_single_member():
    rate = essential_interval_hit_rate(WeightedVotingGame(0.5, (1,)), IID, ConstituencyPartition([1]), 1000, 0)
    assert rate == 1.0


def test_essential_interval_needs_iid():
    model = PreferenceModel(DistributionSpec.uniform(-0.5, 0.5), DistributionSpec.normal(0, 1))
    with pytest.raises(ModelError):
        essential_interval_hit_rate(WeightedVotingGame(0.5, (1,)), model, ConstituencyPartition([1]), 10, 0)
