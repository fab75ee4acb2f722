"""Shared domain types: sentiment scales, tweet records, date windows,
evolving mention networks and weighted interaction graphs.

All types are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class SentimentScale:
    """One of the three per-message sentiment score scales.

    MC is integer in [-25, 25], SS integer in [-4, 4], L real in
    [-100, 100]. A score of 0 means "neutral or not detected"; a missing
    score is represented as absent, never as 0.
    """

    kind: str
    min: float
    max: float
    integer_valued: bool

    def __post_init__(self):
        if not (self.min < 0 < self.max):
            raise ValueError(f"scale {self.kind!r}: need min < 0 < max")

    def contains(self, x: float) -> bool:
        return self.min <= x <= self.max


MC = SentimentScale("mc", -25, 25, True)
SS = SentimentScale("ss", -4, 4, True)
L = SentimentScale("l", -100.0, 100.0, False)

SCALES: Mapping[str, SentimentScale] = {"mc": MC, "ss": SS, "l": L}


def clamp_score(x: float, scale: SentimentScale):
    """Cap ``x`` to the scale's range, rounding integer scales to the
    nearest integer (halves away from zero). Total and idempotent."""
    if scale.integer_valued:
        x = math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)
        return int(min(max(x, scale.min), scale.max))
    # normalise -0.0 so serialized output is stable
    return min(max(x, scale.min), scale.max) + 0.0


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 timestamp, normalised to UTC. Naive values are taken as UTC."""
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class TweetRecord:
    """One mention-bearing message.

    ``mentions`` is deduplicated (first occurrence kept) and may include
    the sender; self-mentions are dropped later, at network construction.
    ``scores`` maps scale kind ("mc"/"ss"/"l") to the score for that
    scale; absent keys mean the message was not scored on that scale.
    """

    tweet_id: str
    timestamp: datetime
    sender: str
    mentions: tuple[str, ...]
    scores: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        seen, deduped = set(), []
        for m in self.mentions:
            if m not in seen:
                seen.add(m)
                deduped.append(m)
        object.__setattr__(self, "mentions", tuple(deduped))
        if self.timestamp.tzinfo is None:
            object.__setattr__(
                self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(
                self, "timestamp", self.timestamp.astimezone(timezone.utc))
        for kind, value in self.scores.items():
            scale = SCALES.get(kind)
            if scale is None:
                raise ValueError(f"unknown sentiment scale {kind!r}")
            if not scale.contains(value):
                raise ValueError(
                    f"score {value} outside {kind} range "
                    f"[{scale.min}, {scale.max}]")
            if scale.integer_valued and value != int(value):
                raise ValueError(f"{kind} scores are integers, got {value}")

    @property
    def day(self) -> date:
        """UTC calendar day of the tweet."""
        return self.timestamp.date()

    def score(self, scale: SentimentScale) -> Optional[float]:
        return self.scores.get(scale.kind)


@dataclass(frozen=True)
class DateWindow:
    """Inclusive range of UTC calendar days."""

    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"window end {self.end} before start {self.start}")

    @classmethod
    def from_string(cls, text: str) -> "DateWindow":
        """Parse ``YYYY-MM-DD..YYYY-MM-DD``."""
        try:
            lo, hi = text.split("..")
            return cls(date.fromisoformat(lo), date.fromisoformat(hi))
        except ValueError as exc:
            raise ValueError(f"bad window {text!r}: expected START..END") from exc

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def days(self) -> Iterator[date]:
        for i in range(self.n_days):
            yield self.start + timedelta(days=i)

    def __contains__(self, day: date) -> bool:
        return self.start <= day <= self.end

    def day_index(self, day: date) -> int:
        return (day - self.start).days

    def __str__(self) -> str:
        return f"{self.start.isoformat()}..{self.end.isoformat()}"


class EvolvingMentionNetwork:
    """Ordered sequence of daily directed adjacency snapshots over a fixed
    user set.

    Entry (i, j) of a snapshot is nonzero when user i mentioned user j that
    day: 1 in binary mode, the mention count in weighted mode. Snapshots
    cover consecutive calendar days, share one index space, and carry no
    self-loops.
    """

    def __init__(self, users: Sequence[str],
                 snapshots: Iterable[tuple[date, sparse.csr_array]],
                 binary: bool = True):
        self.users: tuple[str, ...] = tuple(users)
        if len(set(self.users)) != len(self.users):
            raise ValueError("duplicate user ids")
        self.index: dict[str, int] = {u: i for i, u in enumerate(self.users)}
        self.snapshots: tuple[tuple[date, sparse.csr_array], ...] = tuple(
            (d, sparse.csr_array(a)) for d, a in snapshots)
        self.binary = binary
        n = len(self.users)
        if not self.snapshots:
            raise ValueError("need at least one snapshot")
        prev = None
        for day, mat in self.snapshots:
            if mat.shape != (n, n):
                raise ValueError(f"snapshot {day} shape {mat.shape} != ({n},{n})")
            if prev is not None and (day - prev).days != 1:
                raise ValueError(f"snapshot days not consecutive at {day}")
            prev = day
            if mat.diagonal().any():
                raise ValueError(f"snapshot {day} has self-loops")
            if binary and mat.nnz and not np.all(mat.data == 1):
                raise ValueError(f"snapshot {day} not binary")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_days(self) -> int:
        return len(self.snapshots)

    @property
    def first_day(self) -> date:
        return self.snapshots[0][0]

    def first_day_active(self) -> frozenset[str]:
        """Users with at least one outgoing edge in the first snapshot."""
        _, first = self.snapshots[0]
        rows = np.asarray((abs(first).sum(axis=1))).ravel()
        return frozenset(self.users[i] for i in np.flatnonzero(rows))


class WeightedInteractionGraph:
    """Undirected graph weighted by the number of messages exchanged
    between two users in either direction. No self-loops; weights >= 1."""

    def __init__(self, users: Sequence[str],
                 edges: Mapping[tuple[str, str], int]):
        self.users: tuple[str, ...] = tuple(users)
        if len(set(self.users)) != len(self.users):
            raise ValueError("duplicate user ids")
        known = set(self.users)
        canon: dict[tuple[str, str], int] = {}
        for (a, b), w in edges.items():
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise ValueError(f"edge ({a!r}, {b!r}) outside user set")
            key = (a, b) if a <= b else (b, a)
            if key in canon:
                raise ValueError(f"duplicate edge {key}")
            if w < 1 or w != int(w):
                raise ValueError(f"edge {key} weight {w} not a positive integer")
            canon[key] = int(w)
        self.edges: dict[tuple[str, str], int] = dict(sorted(canon.items()))
        self._adj: dict[str, dict[str, int]] = {u: {} for u in self.users}
        for (a, b), w in self.edges.items():
            self._adj[a][b] = w
            self._adj[b][a] = w

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbours(self, user: str) -> Mapping[str, int]:
        return self._adj[user]

    def weight(self, a: str, b: str) -> int:
        return self._adj[a].get(b, 0)

    def degree(self, user: str, weighted: bool = False) -> float:
        adj = self._adj[user]
        return float(sum(adj.values()) if weighted else len(adj))

    def subgraph_users(self, members: Iterable[str]) -> "WeightedInteractionGraph":
        keep = set(members)
        edges = {(a, b): w for (a, b), w in self.edges.items()
                 if a in keep and b in keep}
        return WeightedInteractionGraph(
            [u for u in self.users if u in keep], edges)

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(self.users)
        g.add_weighted_edges_from((a, b, w) for (a, b), w in self.edges.items())
        return g
