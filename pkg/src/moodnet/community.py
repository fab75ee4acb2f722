"""Community detection, conductance metrics, candidate statistics, and
endurance / daily-sentiment tracking over time.

Detection uses the Louvain method (unweighted or message-count weighted)
and k-clique percolation; candidate communities are then profiled with
conductance, internal-activity, sentiment and participation statistics.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Optional, Sequence

import numpy as np
from networkx.algorithms import community as nx_comm

from .core import DateWindow, SentimentScale, TweetRecord, WeightedInteractionGraph
from .ingest import mention_events

PARTICIPATION_BIN_EDGES = (20.0, 40.0, 60.0, 80.0, 100.0)


@dataclass(frozen=True)
class Community:
    members: frozenset[str]
    source_algorithm: str  # louvain | weighted_louvain | k_clique(k)
    id: str


@dataclass(frozen=True)
class CommunityStats:
    size: int
    internal_edges: int
    internal_edges_per_node: float
    conductance: float
    weighted_conductance: float
    connected: bool
    nonzero_sentiment_fraction: float
    mean_internal_sentiment: Optional[float]
    avg_participation_pct: float
    participation_bins: tuple[float, float, float, float, float]

    def as_dict(self) -> dict:
        return {
            "size": self.size,
            "internal_edges": self.internal_edges,
            "internal_edges_per_node": self.internal_edges_per_node,
            "conductance": self.conductance,
            "weighted_conductance": self.weighted_conductance,
            "connected": self.connected,
            "nonzero_sentiment_fraction": self.nonzero_sentiment_fraction,
            "mean_internal_sentiment": self.mean_internal_sentiment,
            "avg_participation_pct": self.avg_participation_pct,
            "participation_bins": list(self.participation_bins),
        }


@dataclass(frozen=True)
class EnduranceRecord:
    active_autumn: int
    active_spring: int
    user_loss_factor: float


@dataclass(frozen=True)
class DailySentiment:
    day: date
    mean: Optional[float]  # None when no scored internal mentions that day
    count: int


def _sorted_partition(parts: Iterable[frozenset]) -> list[frozenset]:
    return sorted((frozenset(p) for p in parts), key=lambda c: min(c))


def louvain(graph: WeightedInteractionGraph, use_weights: bool = False,
            seed: int = 0) -> list[Community]:
    """Louvain partition of all users (greedy modularity, local moves
    plus aggregation). The node visit order is shuffled by ``seed`` and
    the same seed always yields the same partition."""
    if graph.n_users == 0:
        raise ValueError("empty graph")
    g = graph.to_networkx()
    parts = nx_comm.louvain_communities(
        g, weight="weight" if use_weights else None, seed=seed,
        threshold=1e-9)
    algorithm = "weighted_louvain" if use_weights else "louvain"
    prefix = "W" if use_weights else "L"
    return [Community(frozenset(p), algorithm, f"{prefix}{i}")
            for i, p in enumerate(_sorted_partition(parts))]


def k_clique_communities(graph: WeightedInteractionGraph,
                         k: int) -> list[Community]:
    """Unions of adjacent k-cliques (sharing k-1 nodes); overlapping
    communities allowed, nodes in no k-clique appear in none."""
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    g = graph.to_networkx()
    comms = nx_comm.k_clique_communities(g, k)
    return [Community(frozenset(c), f"k_clique({k})", f"K{i}")
            for i, c in enumerate(_sorted_partition(comms))]


def conductance(graph: WeightedInteractionGraph, members: Iterable[str],
                weighted: bool = False) -> float:
    """cut(S) / min(vol(S), vol(complement)), in [0, 1].

    vol(X) sums the (weighted) degrees of X's nodes, so internal edges
    count twice and crossing edges once per side. A side with zero
    volume makes the set maximally poor: the value is defined as 1.
    """
    inside = set(members)
    if not inside:
        raise ValueError("empty community")
    unknown = inside - set(graph.users)
    if unknown:
        raise ValueError(f"members outside graph: {sorted(unknown)[:5]}")
    if len(inside) == len(graph.users):
        raise ValueError("community equals the whole graph")
    cut = 0.0
    vol_in = 0.0
    vol_out = 0.0
    for (a, b), w in graph.edges.items():
        value = float(w) if weighted else 1.0
        a_in, b_in = a in inside, b in inside
        if a_in != b_in:
            cut += value
            vol_in += value
            vol_out += value
        elif a_in:
            vol_in += 2 * value
        else:
            vol_out += 2 * value
    denom = min(vol_in, vol_out)
    if denom == 0:
        return 1.0
    return cut / denom


def _induced_connected(graph: WeightedInteractionGraph,
                       inside: set[str]) -> bool:
    if not inside:
        return True
    start = next(iter(inside))
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nxt in graph.neighbours(node):
            if nxt in inside and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(inside)


def _participation_bin(pct: float) -> int:
    # [0,20], (20,40], (40,60], (60,80], (80,100]
    for i, hi in enumerate(PARTICIPATION_BIN_EDGES):
        if pct <= hi:
            return i
    return len(PARTICIPATION_BIN_EDGES) - 1


def community_stats(graph: WeightedInteractionGraph,
                    tweets: Sequence[TweetRecord],
                    members: Iterable[str],
                    scale: SentimentScale,
                    window: DateWindow) -> CommunityStats:
    """Candidate-community profile: size, internal mention activity,
    conductance both ways, connectivity, sentiment, and participation.

    Participation of a user is the percentage of their active days
    (as sender or mentionee of anything in the window) on which they
    were active inside the community; users with no active days are
    left out of the average and bins.
    """
    inside = set(members)
    unknown = inside - set(graph.users)
    if unknown:
        raise ValueError(f"members outside graph: {sorted(unknown)[:5]}")
    size = len(inside)

    internal = 0
    scored = 0
    nonzero = 0
    total = 0.0
    active_any: defaultdict[str, set] = defaultdict(set)
    active_in: defaultdict[str, set] = defaultdict(set)
    for rec, m in mention_events(tweets, window):
        day = rec.day
        active_any[rec.sender].add(day)
        active_any[m].add(day)
        if rec.sender in inside and m in inside:
            internal += 1
            active_in[rec.sender].add(day)
            active_in[m].add(day)
            s = rec.score(scale)
            if s is not None:
                scored += 1
                total += s
                if s != 0:
                    nonzero += 1
    # tweets without mentions still make their sender active that day
    for rec in tweets:
        if rec.day in window:
            active_any[rec.sender].add(rec.day)

    whole_graph = len(inside) == len(graph.users)
    pcts = []
    for u in sorted(inside):
        days_any = len(active_any.get(u, ()))
        if days_any == 0:
            continue
        pcts.append(100.0 * len(active_in.get(u, ())) / days_any)
    bins = [0.0] * 5
    for pct in pcts:
        bins[_participation_bin(pct)] += 1
    if pcts:
        bins = [b / len(pcts) for b in bins]

    return CommunityStats(
        size=size,
        internal_edges=internal,
        internal_edges_per_node=internal / size if size else 0.0,
        conductance=0.0 if whole_graph else conductance(graph, inside, False),
        weighted_conductance=(0.0 if whole_graph
                              else conductance(graph, inside, True)),
        connected=_induced_connected(graph, inside),
        nonzero_sentiment_fraction=nonzero / scored if scored else 0.0,
        mean_internal_sentiment=total / scored if scored else None,
        avg_participation_pct=float(np.mean(pcts)) if pcts else 0.0,
        participation_bins=tuple(bins),
    )


def _active_users(tweets: Sequence[TweetRecord], inside: set[str],
                  period: DateWindow) -> set[str]:
    active = set()
    for rec, m in mention_events(tweets, period):
        if rec.sender in inside and m in inside:
            active.add(rec.sender)
            active.add(m)
    return active


def user_loss_factor(tweets: Sequence[TweetRecord], members: Iterable[str],
                     period_a: DateWindow,
                     period_b: DateWindow) -> EnduranceRecord:
    """Members active (mentioned or were mentioned, inside the
    community) in the earlier period divided by those active in the
    later one. 1 means full retention; larger means attrition."""
    if not (period_a.end < period_b.start or period_b.end < period_a.start):
        raise ValueError("periods must be disjoint")
    inside = set(members)
    a = len(_active_users(tweets, inside, period_a))
    b = len(_active_users(tweets, inside, period_b))
    if b == 0:
        raise ValueError("community extinct: no active users in later period")
    return EnduranceRecord(a, b, a / b)


def daily_sentiment_series(tweets: Sequence[TweetRecord],
                           members: Iterable[str],
                           scale: SentimentScale,
                           window: DateWindow) -> list[DailySentiment]:
    """Per-day mean of scored internal-mention sentiment. Days without
    scored internal mentions carry an absent mean, never 0."""
    inside = set(members)
    sums = [0.0] * window.n_days
    counts = [0] * window.n_days
    for rec, m in mention_events(tweets, window):
        if rec.sender in inside and m in inside:
            s = rec.score(scale)
            if s is not None:
                i = window.day_index(rec.day)
                sums[i] += s
                counts[i] += 1
    return [DailySentiment(day, sums[i] / counts[i] if counts[i] else None,
                           counts[i])
            for i, day in enumerate(window.days())]


def flag_sentiment_anomalies(series: Sequence[DailySentiment],
                             z_threshold: float) -> list[date]:
    """Days whose mean deviates from the series mean by more than
    ``z_threshold`` sample standard deviations (present days only)."""
    present = [(p.day, p.mean) for p in series if p.mean is not None]
    if len(present) < 8:
        raise ValueError(f"need >= 8 days with data, have {len(present)}")
    values = np.array([v for _, v in present])
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    return [day for day, v in present if abs(v - mean) > z_threshold * std]


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation in [-1, 1]."""
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise ValueError("zero variance")
    r = float(dx @ dy) / (sx * sy)
    return max(-1.0, min(1.0, r))
