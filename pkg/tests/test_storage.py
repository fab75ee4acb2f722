from datetime import date

import numpy as np
import pytest

from moodnet.core import DateWindow, SS, WeightedInteractionGraph
from moodnet.ingest import build_evolving_network, build_interaction_graph
from moodnet import storage

from conftest import WINDOW, tw


@pytest.fixture
def tweets():
    return [
        tw("a", ["b"], ts="2014-10-09T08:00:00Z", ss=2, mc=10, l=40.5),
        tw("b", ["a", "c"], ts="2014-10-10T09:30:00Z", ss=-1),
        tw("c", ["a"], ts="2014-10-11T10:00:00Z"),
        tw("a", ["b"], ts="2014-10-11T11:00:00Z", ss=0),
    ]


class TestNetworkRoundTrip:
    def test_weighted_round_trip(self, tweets, tmp_path):
        net = build_evolving_network(tweets, ["a", "b", "c"], WINDOW,
                                     binary=False)
        storage.write_network(net, tmp_path)
        loaded = storage.read_network(tmp_path, binary=False)
        assert loaded.users == net.users
        assert loaded.n_days == net.n_days
        for (d1, m1), (d2, m2) in zip(net.snapshots, loaded.snapshots):
            assert d1 == d2
            assert (m1 != m2).nnz == 0

    def test_binary_load_collapses_weights(self, tweets, tmp_path):
        tweets = tweets + [tw("a", ["b"], ts="2014-10-09T09:00:00Z", ss=1)]
        net = build_evolving_network(tweets, ["a", "b", "c"], WINDOW,
                                     binary=False)
        storage.write_network(net, tmp_path)
        loaded = storage.read_network(tmp_path, binary=True)
        assert loaded.snapshots[0][1][0, 1] == 1


class TestMentionsRoundTrip:
    def test_scores_preserved(self, tweets, tmp_path):
        path = tmp_path / "mentions.csv"
        storage.write_mentions(tweets, path, WINDOW)
        loaded = storage.read_mentions(path)
        # "b" mentioned a and c: two rows
        assert len(loaded) == 5
        first = loaded[0]
        assert first.sender == "a"
        assert first.scores == {"mc": 10, "ss": 2, "l": 40.5}
        unscored = [r for r in loaded if r.sender == "c"][0]
        assert unscored.scores == {}

    def test_user_restriction(self, tweets, tmp_path):
        path = tmp_path / "mentions.csv"
        storage.write_mentions(tweets, path, WINDOW, users=["a", "b"])
        loaded = storage.read_mentions(path)
        assert {(r.sender, r.mentions[0]) for r in loaded} \
            == {("a", "b"), ("b", "a")}


class TestInteractionRoundTrip:
    def test_round_trip(self, tweets, tmp_path):
        graph = build_interaction_graph(tweets, WINDOW)
        path = tmp_path / "interaction.csv"
        storage.write_interaction(graph, path)
        loaded = storage.read_interaction(path)
        assert loaded.edges == graph.edges


class TestScores:
    def test_round_trip_with_missing_ranks(self, tmp_path):
        path = tmp_path / "scores.csv"
        storage.write_scores(path, ["a", "b"], [1.5, 2.25], [1.0, 3.5],
                             {"b": 1})
        rows = storage.read_scores(path)
        assert rows[0] == {"user": "a", "broadcast": 1.5, "receive": 1.0,
                           "rank": None}
        assert rows[1]["rank"] == 1

    def test_full_float_precision_preserved(self, tmp_path):
        value = 1.2345678901234567
        path = tmp_path / "scores.csv"
        storage.write_scores(path, ["a"], [value], [value], {})
        assert storage.read_scores(path)[0]["broadcast"] == value


class TestJson:
    def test_write_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        storage.write_json({"z": 1, "a": [2, 3]}, a)
        storage.write_json({"a": [2, 3], "z": 1}, b)
        assert a.read_bytes() == b.read_bytes()
