import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moodnet.core import SCALES, SS
from moodnet.sentiment import (UserSentimentAttributes, attributes_by_user,
                               group_means, moving_average_by_rank,
                               randomization_pvalue, user_attributes)

from conftest import tw


class TestUserAttributes:
    def test_three_score_example(self):
        a = user_attributes([2, 0, -1])
        assert a.mean_sentiment == pytest.approx(1 / 3)
        assert a.mean_abs_sentiment == pytest.approx(1.0)
        assert a.pos_fraction == pytest.approx(1 / 3)
        assert a.zero_fraction == pytest.approx(1 / 3)
        assert a.neg_fraction == pytest.approx(1 / 3)
        assert a.avg_pos_strength == pytest.approx(2 / 3)
        assert a.avg_neg_strength == pytest.approx(1 / 3)
        assert a.edge_count == 3

    def test_all_zero_scores(self):
        a = user_attributes([0, 0])
        assert a.zero_fraction == 1.0
        assert (a.mean_sentiment, a.mean_abs_sentiment, a.pos_fraction,
                a.neg_fraction, a.avg_pos_strength, a.avg_neg_strength) \
            == (0, 0, 0, 0, 0, 0)

    def test_singleton(self):
        a = user_attributes([5])
        assert a.mean_sentiment == 5
        assert a.pos_fraction == 1.0
        assert a.avg_pos_strength == 5

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no outgoing edges"):
            user_attributes([])

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(["mc", "ss", "l"]), st.data())
    def test_identities(self, kind, data):
        scale = SCALES[kind]
        if scale.integer_valued:
            values = data.draw(st.lists(
                st.integers(int(scale.min), int(scale.max)),
                min_size=1, max_size=60))
        else:
            values = data.draw(st.lists(
                st.floats(scale.min, scale.max, allow_nan=False),
                min_size=1, max_size=60))
        a = user_attributes(values)
        assert a.pos_fraction + a.zero_fraction + a.neg_fraction \
            == pytest.approx(1.0, abs=1e-12)
        assert a.mean_sentiment == a.avg_pos_strength - a.avg_neg_strength
        assert a.mean_abs_sentiment == a.avg_pos_strength + a.avg_neg_strength


class TestAttributesByUser:
    def test_one_score_per_mention_event(self):
        tweets = [tw("a", ["b", "c"], ss=2), tw("a", ["b"], ss=-1),
                  tw("b", ["a"], ss=0), tw("c", ["a"])]
        attrs = attributes_by_user(tweets, SS)
        assert attrs["a"].edge_count == 3  # two mentions + one mention
        assert attrs["b"].zero_fraction == 1.0
        assert "c" not in attrs  # unscored tweet contributes nothing

    def test_self_mentions_excluded(self):
        attrs = attributes_by_user([tw("a", ["a", "b"], ss=3)], SS)
        assert attrs["a"].edge_count == 1


class TestGroupMeans:
    def _attrs(self, values):
        return {f"u{i}": user_attributes(v) for i, v in enumerate(values)}

    def test_singleton_subset(self):
        attrs = self._attrs([[1, -1], [4]])
        assert group_means(attrs, ["u1"]) == attrs["u1"]

    def test_two_user_average(self):
        attrs = {"a": user_attributes([1, 1, 1, 0, 0]),   # pos 0.6
                 "b": user_attributes([2, 0, 0, 0, 0])}   # pos 0.2
        g = group_means(attrs, ["a", "b"])
        assert g.pos_fraction == pytest.approx(0.4)

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            group_means(self._attrs([[1]]), [])


class TestRandomizationPvalue:
    def _population(self, n=40, seed=1):
        rng = np.random.default_rng(seed)
        return {f"u{i:03d}": user_attributes(
            rng.integers(-4, 5, size=5).tolist()) for i in range(n)}

    def test_extreme_low_observation(self):
        attrs = self._population()
        p = randomization_pvalue(attrs, 5, -4.0, "mean_sentiment",
                                 n_samples=500, side="lower", seed=0)
        assert p <= 1 / 500 or p == 0.0

    def test_extreme_high_observation(self):
        attrs = self._population()
        p = randomization_pvalue(attrs, 5, 4.0, "mean_sentiment",
                                 n_samples=500, side="upper", seed=0)
        assert p <= 1 / 500 or p == 0.0

    def test_median_observation_is_unremarkable(self):
        attrs = self._population(n=80)
        pop_mean = float(np.mean([a.mean_sentiment for a in attrs.values()]))
        p = randomization_pvalue(attrs, 10, pop_mean, "mean_sentiment",
                                 n_samples=400, side="lower", seed=3)
        assert 0.2 < p < 0.8

    def test_nonfinite_observed_rejected(self):
        with pytest.raises(ValueError):
            randomization_pvalue(self._population(), 5, float("-inf"),
                                 "mean_sentiment", 10, "lower")

    def test_bad_sizes_rejected(self):
        attrs = self._population(n=10)
        with pytest.raises(ValueError):
            randomization_pvalue(attrs, 11, 0.0, "mean_sentiment", 10, "lower")
        with pytest.raises(ValueError):
            randomization_pvalue(attrs, 5, 0.0, "mean_sentiment", 0, "lower")

    def test_deterministic_for_seed(self):
        attrs = self._population()
        args = (attrs, 5, 0.1, "mean_sentiment", 300, "upper")
        assert randomization_pvalue(*args, seed=7) \
            == randomization_pvalue(*args, seed=7)

    def test_thread_count_does_not_change_result(self, monkeypatch):
        attrs = self._population(n=60)
        args = (attrs, 8, 0.05, "mean_sentiment", 2500, "upper")
        monkeypatch.setenv("MOODNET_THREADS", "1")
        p1 = randomization_pvalue(*args, seed=11)
        monkeypatch.setenv("MOODNET_THREADS", "4")
        p4 = randomization_pvalue(*args, seed=11)
        assert p1 == p4


class TestMovingAverage:
    def test_window_one_is_identity(self):
        assert moving_average_by_rank([1, 2, 3], 1).tolist() == [1, 2, 3]

    def test_window_two(self):
        out = moving_average_by_rank([1, 2, 3, 4], 2)
        assert out.tolist() == [1.5, 2.5, 3.5]

    def test_constant_series(self):
        assert moving_average_by_rank([7.0] * 5, 3).tolist() == [7.0] * 3

    def test_window_longer_than_series_rejected(self):
        with pytest.raises(ValueError):
            moving_average_by_rank([1, 2], 3)

    @given(st.integers(1, 8), st.integers(-50, 50), st.integers(-20, 20))
    def test_linear_series_stays_linear(self, window, intercept, slope):
        n = 12
        values = [intercept + slope * i for i in range(n)]
        out = moving_average_by_rank(values, window)
        diffs = np.diff(out)
        assert np.allclose(diffs, slope)
