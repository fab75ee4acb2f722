from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from moodnet.communicability import (ALPHA_GRID, CommunicabilityConfig,
                                     ScoreVector, broadcast_scores,
                                     rank_by_score, receive_scores,
                                     resolvent_apply)
from moodnet.core import EvolvingMentionNetwork

from oracles import walk_broadcast, walk_receive

DAY0 = date(2014, 10, 9)


def net_from_days(day_edges, n):
    users = [f"u{i}" for i in range(n)]
    snapshots = []
    for offset, edges in enumerate(day_edges):
        mat = np.zeros((n, n))
        for u, v in edges:
            mat[u, v] = 1.0
        snapshots.append((DAY0 + timedelta(days=offset), sparse.csr_array(mat)))
    return EvolvingMentionNetwork(users, snapshots)


@st.composite
def random_evolving(draw):
    n = draw(st.integers(2, 8))
    days = draw(st.integers(1, 5))
    day_edges = []
    for _ in range(days):
        edges = set()
        for u in range(n):
            for v in range(n):
                if u != v and draw(st.booleans()) and draw(st.booleans()):
                    edges.add((u, v))
        day_edges.append(sorted(edges))
    return n, day_edges


class TestConfig:
    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            CommunicabilityConfig(alpha=1.0)
        with pytest.raises(ValueError):
            CommunicabilityConfig(alpha=0.0)

    def test_paper_alpha_grid_is_valid(self):
        CommunicabilityConfig(alpha_grid=ALPHA_GRID)


class TestResolventApply:
    def test_zero_matrix_returns_v(self):
        a = sparse.csr_array((3, 3))
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(resolvent_apply(a, 0.5, v, 5), v)

    def test_k_zero_truncates_at_identity(self):
        a = sparse.csr_array(np.ones((2, 2)) - np.eye(2))
        v = np.array([1.0, 1.0])
        assert np.allclose(resolvent_apply(a, 0.9, v, 0), v)

    def test_nilpotent_two_node_chain(self):
        # single edge 0 -> 1: the series is exactly I + alpha*A
        a = sparse.csr_array(np.array([[0.0, 1.0], [0.0, 0.0]]))
        out = resolvent_apply(a, 0.5, np.ones(2), 3)
        assert np.allclose(out, [1.5, 1.0])

    def test_dimension_mismatch(self):
        a = sparse.csr_array((3, 3))
        with pytest.raises(ValueError):
            resolvent_apply(a, 0.5, np.ones(2), 1)


class TestScores:
    def test_all_zero_snapshots_score_one(self):
        net = net_from_days([[], [], []], 4)
        cfg = CommunicabilityConfig(alpha=0.5, truncation_order=5)
        assert np.allclose(broadcast_scores(net, cfg).scores, 1.0)
        assert np.allclose(receive_scores(net, cfg).scores, 1.0)

    def test_two_hop_time_respecting_path(self):
        # day-1 edge 0->1, day-2 edge 1->2 (oracle: 1.75 / 1.5 / 1)
        net = net_from_days([[(0, 1)], [(1, 2)]], 3)
        cfg = CommunicabilityConfig(alpha=0.5, truncation_order=4)
        assert np.allclose(broadcast_scores(net, cfg).scores,
                           [1.75, 1.5, 1.0], atol=1e-12)
        assert np.allclose(receive_scores(net, cfg).scores,
                           [1.0, 1.5, 1.75], atol=1e-12)

    def test_swapped_days_break_the_path(self):
        net = net_from_days([[(1, 2)], [(0, 1)]], 3)
        cfg = CommunicabilityConfig(alpha=0.5, truncation_order=4)
        assert np.allclose(broadcast_scores(net, cfg).scores,
                           [1.5, 1.5, 1.0], atol=1e-12)

    def test_single_snapshot_receive_is_transposed_broadcast(self):
        net = net_from_days([[(0, 1), (2, 1), (2, 0)]], 3)
        transposed = net_from_days([[(1, 0), (1, 2), (0, 2)]], 3)
        cfg = CommunicabilityConfig(alpha=0.3, truncation_order=6)
        assert np.allclose(receive_scores(net, cfg).scores,
                           broadcast_scores(transposed, cfg).scores)

    @settings(max_examples=40, deadline=None)
    @given(random_evolving(), st.sampled_from([0.15, 0.5, 0.9]))
    def test_matches_walk_enumeration(self, case, alpha):
        n, day_edges = case
        net = net_from_days(day_edges, n)
        cfg = CommunicabilityConfig(alpha=alpha, truncation_order=6)
        expect_b = walk_broadcast(day_edges, n, alpha, 6)
        expect_r = walk_receive(day_edges, n, alpha, 6)
        assert np.allclose(broadcast_scores(net, cfg).scores, expect_b,
                           atol=1e-9, rtol=0)
        assert np.allclose(receive_scores(net, cfg).scores, expect_r,
                           atol=1e-9, rtol=0)

    @settings(max_examples=25, deadline=None)
    @given(random_evolving())
    def test_transpose_duality(self, case):
        n, day_edges = case
        cfg = CommunicabilityConfig(alpha=0.6, truncation_order=5)
        net = net_from_days(day_edges, n)
        dual = net_from_days([[(v, u) for u, v in edges]
                              for edges in reversed(day_edges)], n)
        assert np.allclose(receive_scores(net, cfg).scores,
                           broadcast_scores(dual, cfg).scores)

    @settings(max_examples=25, deadline=None)
    @given(random_evolving(), st.integers(0, 10 ** 6))
    def test_adding_an_edge_never_decreases_scores(self, case, pick):
        n, day_edges = case
        day = pick % len(day_edges)
        u = (pick // 7) % n
        v = (pick // 53) % n
        if u == v or (u, v) in day_edges[day]:
            return
        cfg = CommunicabilityConfig(alpha=0.5, truncation_order=5)
        before = broadcast_scores(net_from_days(day_edges, n), cfg).scores
        grown = [list(e) for e in day_edges]
        grown[day].append((u, v))
        after = broadcast_scores(net_from_days(grown, n), cfg).scores
        assert (after >= before - 1e-12).all()

    def test_scores_at_least_one(self):
        net = net_from_days([[(0, 1), (1, 0)]], 2)
        cfg = CommunicabilityConfig(alpha=0.9, truncation_order=10)
        assert (broadcast_scores(net, cfg).scores >= 1.0).all()


class TestRanking:
    def _scores(self, values):
        users = tuple(f"u{i}" for i in range(len(values)))
        return ScoreVector(users, np.array(values, dtype=float), "broadcast")

    def test_descending_order(self):
        ranked = rank_by_score(self._scores([3.0, 1.0, 2.0]),
                               ["u0", "u1", "u2"])
        assert ranked == ["u0", "u2", "u1"]

    def test_ties_broken_by_id(self):
        ranked = rank_by_score(self._scores([2.0, 2.0]), ["u1", "u0"])
        assert ranked == ["u0", "u1"]

    def test_eligibility_filters_before_ranking(self):
        ranked = rank_by_score(self._scores([9.0, 1.0, 5.0]), ["u1", "u2"])
        assert ranked == ["u2", "u1"]

    def test_unknown_eligible_user_rejected(self):
        with pytest.raises(ValueError):
            rank_by_score(self._scores([1.0]), ["nope"])
