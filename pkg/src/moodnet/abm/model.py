"""Agent-based model structure: global parameters, per-agent behavioural
constants, and model construction from a community's message history.

Agents sit on a static undirected graph (users who exchanged at least
``neighbour_threshold`` messages). Behavioural probabilities are
estimated per opportunity: a window in which an agent received nothing
in the previous window gives one initiation opportunity per neighbour,
while a window following incoming messages gives one reply opportunity
per recent sender and one propagation opportunity per other neighbour.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..core import (DateWindow, SCALES, SentimentScale, TweetRecord,
                    WeightedInteractionGraph)
from ..ingest import build_interaction_graph, mention_events


@dataclass(frozen=True)
class GlobalParams:
    """The six model-wide parameters.

    ``neighbour_threshold`` only affects model construction from
    history, never the dynamics themselves.
    """

    iterations_per_day: int = 48
    mean_burst_size: float = 1.5
    contagion_factor: float = 0.1
    reset_probability: float = 0.05
    sentiment_noise: float = 1.0
    neighbour_threshold: int = 1

    def __post_init__(self):
        if self.iterations_per_day < 1:
            raise ValueError("iterations_per_day must be >= 1")
        if self.mean_burst_size < 1:
            raise ValueError("mean_burst_size must be >= 1")
        if self.contagion_factor < 0:
            raise ValueError("contagion_factor must be >= 0")
        if not 0 <= self.reset_probability <= 1:
            raise ValueError("reset_probability must be in [0, 1]")
        if self.sentiment_noise < 0:
            raise ValueError("sentiment_noise must be >= 0")
        if self.neighbour_threshold < 1:
            raise ValueError("neighbour_threshold must be >= 1")

    def as_dict(self) -> dict:
        return {
            "iterations_per_day": self.iterations_per_day,
            "mean_burst_size": self.mean_burst_size,
            "contagion_factor": self.contagion_factor,
            "reset_probability": self.reset_probability,
            "sentiment_noise": self.sentiment_noise,
            "neighbour_threshold": self.neighbour_threshold,
        }

    def values_tuple(self) -> tuple:
        """Canonical ordering, used for lexicographic tie-breaks."""
        return (self.iterations_per_day, self.mean_burst_size,
                self.contagion_factor, self.reset_probability,
                self.sentiment_noise, self.neighbour_threshold)


@dataclass(frozen=True)
class AgentProfile:
    p_init: float
    p_reply: float
    p_prop: float
    baseline_sentiment: float
    neutral_sentiment: float

    def __post_init__(self):
        for name in ("p_init", "p_reply", "p_prop"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

    def as_dict(self) -> dict:
        return {
            "p_init": self.p_init,
            "p_reply": self.p_reply,
            "p_prop": self.p_prop,
            "baseline_sentiment": self.baseline_sentiment,
            "neutral_sentiment": self.neutral_sentiment,
        }


@dataclass(frozen=True)
class AgentState:
    """Evolving per-agent state. ``current_sentiment`` is an unclamped
    real; clamping applies to emitted messages only."""

    current_sentiment: float
    recent_senders: frozenset[int]


class AgentModel:
    """Graph + profiles + globals on one sentiment scale."""

    def __init__(self, graph: WeightedInteractionGraph,
                 profiles: Mapping[str, AgentProfile],
                 global_params: GlobalParams,
                 scale: SentimentScale,
                 baseline_fallbacks: Iterable[str] = (),
                 estimation_counts: Optional[Mapping[str, dict]] = None):
        missing = set(graph.users) - set(profiles)
        if missing:
            raise ValueError(f"profiles missing for {sorted(missing)[:5]}")
        self.graph = graph
        self.users: tuple[str, ...] = graph.users
        self.profiles: dict[str, AgentProfile] = {
            u: profiles[u] for u in self.users}
        self.global_params = global_params
        self.scale = scale
        # users whose baseline fell back to the community level
        self.baseline_fallbacks = frozenset(baseline_fallbacks)
        # per-user (hits, opportunities) pairs behind each probability,
        # kept for estimation diagnostics; empty for hand-built models
        self.estimation_counts = dict(estimation_counts or {})

    @property
    def n_agents(self) -> int:
        return len(self.users)

    def with_params(self, global_params: GlobalParams) -> "AgentModel":
        """Same graph and profiles under different dynamics parameters
        (valid only when the construction-relevant parameters match)."""
        same_build = (
            global_params.iterations_per_day
            == self.global_params.iterations_per_day
            and global_params.neighbour_threshold
            == self.global_params.neighbour_threshold)
        if not same_build:
            raise ValueError("iterations_per_day/neighbour_threshold differ; "
                             "rebuild the model from history instead")
        return AgentModel(self.graph, self.profiles, global_params,
                          self.scale, self.baseline_fallbacks,
                          self.estimation_counts)

    def arrays(self):
        """CSR adjacency (neighbours sorted by index) and profile arrays
        in the layout both simulation backends consume."""
        index = {u: i for i, u in enumerate(self.users)}
        indptr = np.zeros(self.n_agents + 1, dtype=np.int32)
        rows: list[list[int]] = [
            sorted(index[v] for v in self.graph.neighbours(u))
            for u in self.users]
        for i, row in enumerate(rows):
            indptr[i + 1] = indptr[i] + len(row)
        indices = np.array([j for row in rows for j in row]
                           or [], dtype=np.int32)
        prof = {
            "p_init": np.array([self.profiles[u].p_init for u in self.users]),
            "p_reply": np.array([self.profiles[u].p_reply for u in self.users]),
            "p_prop": np.array([self.profiles[u].p_prop for u in self.users]),
            "baseline": np.array(
                [self.profiles[u].baseline_sentiment for u in self.users]),
            "neutral": np.array(
                [self.profiles[u].neutral_sentiment for u in self.users]),
        }
        return indptr, indices, prof

    def to_json(self) -> str:
        return json.dumps(
            {
                "scale": self.scale.kind,
                "users": list(self.users),
                "edges": [[a, b, w] for (a, b), w in self.graph.edges.items()],
                "profiles": {u: p.as_dict() for u, p in self.profiles.items()},
                "global_params": self.global_params.as_dict(),
                "baseline_fallbacks": sorted(self.baseline_fallbacks),
            },
            indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AgentModel":
        obj = json.loads(text)
        graph = WeightedInteractionGraph(
            obj["users"],
            {(a, b): w for a, b, w in obj["edges"]})
        profiles = {u: AgentProfile(**p) for u, p in obj["profiles"].items()}
        return cls(graph, profiles, GlobalParams(**obj["global_params"]),
                   SCALES[obj["scale"]], obj.get("baseline_fallbacks", ()))


def iteration_window(ts, window: DateWindow, iterations_per_day: int) -> int:
    """Index of the iteration-length window containing ``ts``."""
    day = (ts.date() - window.start).days
    seconds = ts.hour * 3600 + ts.minute * 60 + ts.second
    slot = (seconds * iterations_per_day) // 86400
    return day * iterations_per_day + slot


def build_model(tweets: Sequence[TweetRecord],
                community: Iterable[str],
                global_params: GlobalParams,
                scale: SentimentScale,
                window: Optional[DateWindow] = None) -> AgentModel:
    """Construct graph and per-agent profiles from message history.

    Only messages internal to the community count. Baselines average
    each user's scored sent messages; the shared neutral level averages
    all scored community messages; users with no scored sent messages
    fall back to the neutral level (recorded in ``baseline_fallbacks``).
    """
    members = sorted(set(community))
    if len(members) < 2:
        raise ValueError("community needs at least two users")
    member_set = set(members)
    records = list(tweets)

    internal = [(rec, m) for rec, m in mention_events(records)
                if rec.sender in member_set and m in member_set]
    if window is None:
        if not internal:
            raise ValueError("no internal messages to build a model from")
        days = [rec.day for rec, _ in internal]
        window = DateWindow(min(days), max(days))
    internal = [(rec, m) for rec, m in internal if rec.day in window]
    if not internal:
        raise ValueError("no internal messages within the window")

    graph = build_interaction_graph(
        records, window, min_weight=global_params.neighbour_threshold,
        users=members)

    sent_sum: dict[str, float] = {u: 0.0 for u in members}
    sent_n: dict[str, int] = {u: 0 for u in members}
    total, total_n = 0.0, 0
    for rec, _ in internal:
        s = rec.score(scale)
        if s is None:
            continue
        sent_sum[rec.sender] += s
        sent_n[rec.sender] += 1
        total += s
        total_n += 1
    if total_n == 0:
        raise ValueError(f"no community messages scored on scale {scale.kind!r}")
    neutral = total / total_n

    fallbacks = [u for u in members if sent_n[u] == 0]
    baselines = {u: (sent_sum[u] / sent_n[u] if sent_n[u] else neutral)
                 for u in members}

    ipd = global_params.iterations_per_day
    n_windows = window.n_days * ipd
    # per-user: window index -> senders who messaged them / users they messaged
    received: dict[str, dict[int, set]] = {u: {} for u in members}
    sent_to: dict[str, dict[int, set]] = {u: {} for u in members}
    for rec, m in internal:
        w = iteration_window(rec.timestamp, window, ipd)
        sent_to[rec.sender].setdefault(w, set()).add(m)
        received[m].setdefault(w, set()).add(rec.sender)

    profiles = {}
    counts: dict[str, dict] = {}
    for u in members:
        neighbours = set(graph.neighbours(u))
        deg = len(neighbours)
        # windows whose previous window brought messages from neighbours;
        # the model replies/propagates there and can only initiate elsewhere
        got = {w: senders & neighbours
               for w, senders in received[u].items()}
        after_recv = {w + 1: prev for w, prev in got.items()
                      if prev and w + 1 < n_windows}
        out = sent_to[u]

        init_opp = deg * (n_windows - len(after_recv))
        init_hit = sum(len(set(targets) & neighbours)
                       for w, targets in out.items() if w not in after_recv)
        reply_opp = reply_hit = 0
        prop_opp = prop_hit = 0
        for w, prev in after_recv.items():
            targets = out.get(w, set())
            reply_opp += len(prev)
            reply_hit += len(prev & targets)
            prop_opp += deg - len(prev)
            prop_hit += len((neighbours - prev) & targets)

        profiles[u] = AgentProfile(
            p_init=init_hit / init_opp if init_opp else 0.0,
            p_reply=reply_hit / reply_opp if reply_opp else 0.0,
            p_prop=prop_hit / prop_opp if prop_opp else 0.0,
            baseline_sentiment=baselines[u],
            neutral_sentiment=neutral,
        )
        counts[u] = {"p_init": (init_hit, init_opp),
                     "p_reply": (reply_hit, reply_opp),
                     "p_prop": (prop_hit, prop_opp)}
    return AgentModel(graph, profiles, global_params, scale, fallbacks,
                      counts)
