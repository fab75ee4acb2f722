"""Tweet stream parsing, outlier filtering, reciprocated-mention core
extraction, and construction of evolving networks and interaction graphs.

The three outlier filters target accounts whose mention behaviour would
degenerate the network structure: extreme tweet frequency (bot-like
bulk senders), heavy self-mentioners, and celebrity-like accounts whose
in-degree dwarfs their out-degree.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from .core import (DateWindow, EvolvingMentionNetwork, TweetRecord,
                   WeightedInteractionGraph, parse_timestamp)


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the three user filters.

    The frequency filter only considers users with at least
    ``min_tweets_for_frequency`` collected tweets; lighter users cannot
    exhibit the bulk-sender pattern it targets.
    """

    max_tweets_per_day: float = 200.0
    max_self_mention_ratio: float = 0.5
    max_in_out_degree_ratio: float = 50.0
    min_tweets_for_frequency: int = 200
    # Degree for the in/out ratio: distinct counterparties (default) or
    # raw mention events.
    distinct_degree: bool = True

    def __post_init__(self):
        if self.max_tweets_per_day <= 0:
            raise ValueError("max_tweets_per_day must be positive")
        if not 0 < self.max_self_mention_ratio <= 1:
            raise ValueError("max_self_mention_ratio must be in (0, 1]")
        if self.max_in_out_degree_ratio <= 0:
            raise ValueError("max_in_out_degree_ratio must be positive")


@dataclass(frozen=True)
class FilterReport:
    excluded_frequency: frozenset[str]
    excluded_self_mention: frozenset[str]
    excluded_degree_ratio: frozenset[str]
    retained: frozenset[str]

    @property
    def excluded(self) -> frozenset[str]:
        return (self.excluded_frequency | self.excluded_self_mention
                | self.excluded_degree_ratio)

    def to_json(self) -> str:
        return json.dumps(
            {
                "excluded_frequency": sorted(self.excluded_frequency),
                "excluded_self_mention": sorted(self.excluded_self_mention),
                "excluded_degree_ratio": sorted(self.excluded_degree_ratio),
                "retained": sorted(self.retained),
            },
            indent=2, sort_keys=True)


@dataclass(frozen=True)
class ParseError:
    line_no: int
    message: str


class StrictParseError(ValueError):
    """Raised in strict mode on the first malformed input line."""

    def __init__(self, error: ParseError):
        super().__init__(f"line {error.line_no}: {error.message}")
        self.error = error


_SCORE_KEYS = ("mc", "ss", "l")


def _record_from_obj(obj: dict) -> TweetRecord:
    if not isinstance(obj, dict):
        raise ValueError("tweet must be a JSON object")
    missing = [k for k in ("tweet_id", "timestamp", "sender", "mentions")
               if k not in obj]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    mentions = obj["mentions"]
    if not isinstance(mentions, list) or not all(isinstance(m, str) for m in mentions):
        raise ValueError("mentions must be an array of strings")
    scores = {}
    for key in _SCORE_KEYS:
        if obj.get(key) is not None:
            value = obj[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"score {key!r} must be a number")
            scores[key] = value
    return TweetRecord(
        tweet_id=str(obj["tweet_id"]),
        timestamp=parse_timestamp(str(obj["timestamp"])),
        sender=str(obj["sender"]),
        mentions=tuple(mentions),
        scores=scores,
    )


def parse_tweets(stream: Union[IO, Iterable[Union[bytes, str]]],
                 strict: bool = False,
                 ) -> tuple[list[TweetRecord], list[ParseError]]:
    """Parse a JSON Lines tweet stream.

    Returns records in input order plus a report of malformed lines.
    Blank lines are skipped. In strict mode the first malformed line
    raises :class:`StrictParseError` instead of being collected.
    """
    records: list[TweetRecord] = []
    errors: list[ParseError] = []
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        line = raw.strip()
        if not line:
            continue
        try:
            records.append(_record_from_obj(json.loads(line)))
        except (ValueError, TypeError) as exc:
            err = ParseError(line_no, str(exc))
            if strict:
                raise StrictParseError(err) from exc
            errors.append(err)
    return records, errors


# `mention_events` is the single place that defines what counts as one
# mention: one (tweet, mentioned user) pair after per-tweet deduplication.
def mention_events(tweets: Iterable[TweetRecord],
                   window: Optional[DateWindow] = None,
                   include_self: bool = False):
    """Yield one ``(record, mentionee)`` pair per mention event."""
    for rec in tweets:
        if window is not None and rec.day not in window:
            continue
        for m in rec.mentions:
            if not include_self and m == rec.sender:
                continue
            yield rec, m


def filter_users(tweets: Sequence[TweetRecord],
                 cfg: FilterConfig = FilterConfig()) -> FilterReport:
    """Apply the three outlier filters to every user seen in ``tweets``.

    Each filter is evaluated independently on the full input, so the
    report does not depend on tweet order and the exclusion sets may
    overlap. The user universe is all senders plus all mentioned users.
    """
    if not tweets:
        raise ValueError("no tweets to filter")

    first_last: dict[str, tuple] = {}
    tweet_count: Counter = Counter()
    self_mentions: Counter = Counter()
    all_mentions: Counter = Counter()
    in_parties: defaultdict[str, set] = defaultdict(set)
    out_parties: defaultdict[str, set] = defaultdict(set)
    in_events: Counter = Counter()
    out_events: Counter = Counter()
    universe: set[str] = set()

    for rec in tweets:
        universe.add(rec.sender)
        universe.update(rec.mentions)
        tweet_count[rec.sender] += 1
        ts = rec.timestamp
        if rec.sender in first_last:
            lo, hi = first_last[rec.sender]
            first_last[rec.sender] = (min(lo, ts), max(hi, ts))
        else:
            first_last[rec.sender] = (ts, ts)
        for m in rec.mentions:
            all_mentions[rec.sender] += 1
            if m == rec.sender:
                self_mentions[rec.sender] += 1
            else:
                out_parties[rec.sender].add(m)
                in_parties[m].add(rec.sender)
                out_events[rec.sender] += 1
                in_events[m] += 1

    excl_freq = set()
    for user, count in tweet_count.items():
        if count < cfg.min_tweets_for_frequency:
            continue
        lo, hi = first_last[user]
        span_days = max(1, math.ceil((hi - lo).total_seconds() / 86400.0))
        if count / span_days > cfg.max_tweets_per_day:
            excl_freq.add(user)

    excl_self = set()
    for user, made in all_mentions.items():
        if made and self_mentions[user] / made > cfg.max_self_mention_ratio:
            excl_self.add(user)

    excl_degree = set()
    for user in universe:
        if cfg.distinct_degree:
            din = len(in_parties.get(user, ()))
            dout = len(out_parties.get(user, ()))
        else:
            din = in_events[user]
            dout = out_events[user]
        if dout == 0:
            if din > 0:
                excl_degree.add(user)
        elif din / dout > cfg.max_in_out_degree_ratio:
            excl_degree.add(user)

    excluded = excl_freq | excl_self | excl_degree
    return FilterReport(
        excluded_frequency=frozenset(excl_freq),
        excluded_self_mention=frozenset(excl_self),
        excluded_degree_ratio=frozenset(excl_degree),
        retained=frozenset(universe - excluded),
    )


def reciprocal_core(tweets: Iterable[TweetRecord], users: Iterable[str],
                    window: DateWindow) -> frozenset[str]:
    """Largest connected component of the reciprocated-mention graph.

    An undirected edge {A, B} exists iff A mentioned B and B mentioned A
    within the window (both among ``users``). Users without reciprocated
    edges belong to no component. Ties between equal-size components are
    broken by the component containing the smallest user id.
    """
    keep = set(users)
    directed: set[tuple[str, str]] = set()
    for rec, m in mention_events(tweets, window):
        if rec.sender in keep and m in keep:
            directed.add((rec.sender, m))

    adj: defaultdict[str, set] = defaultdict(set)
    for a, b in directed:
        if (b, a) in directed:
            adj[a].add(b)
            adj[b].add(a)
    if not adj:
        return frozenset()

    seen: set[str] = set()
    best: frozenset[str] = frozenset()
    for start in sorted(adj):
        if start in seen:
            continue
        stack, comp = [start], {start}
        seen.add(start)
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    stack.append(nxt)
        if len(comp) > len(best) or (len(comp) == len(best)
                                     and min(comp) < min(best)):
            best = frozenset(comp)
    return best


def build_evolving_network(tweets: Iterable[TweetRecord],
                           users: Sequence[str],
                           window: DateWindow,
                           binary: bool = True) -> EvolvingMentionNetwork:
    """One directed snapshot per calendar day of ``window``.

    All mentions among the chosen users are included, reciprocated or
    not; self-mentions are dropped. Binary mode records presence,
    weighted mode records the per-day mention count.
    """
    users = tuple(users)
    index = {u: i for i, u in enumerate(users)}
    n = len(users)
    daily: list[Counter] = [Counter() for _ in range(window.n_days)]
    for rec, m in mention_events(tweets, window):
        i = index.get(rec.sender)
        j = index.get(m)
        if i is None or j is None:
            continue
        daily[window.day_index(rec.day)][(i, j)] += 1

    snapshots = []
    for offset, day in enumerate(window.days()):
        counts = daily[offset]
        if counts:
            keys = np.array(list(counts.keys()), dtype=np.int64)
            vals = np.array(list(counts.values()), dtype=np.float64)
            if binary:
                vals = np.ones_like(vals)
            mat = sparse.csr_array(
                (vals, (keys[:, 0], keys[:, 1])), shape=(n, n))
        else:
            mat = sparse.csr_array((n, n), dtype=np.float64)
        snapshots.append((day, mat))
    return EvolvingMentionNetwork(users, snapshots, binary=binary)


def build_interaction_graph(tweets: Iterable[TweetRecord],
                            window: DateWindow,
                            min_weight: int = 1,
                            users: Optional[Iterable[str]] = None,
                            ) -> WeightedInteractionGraph:
    """Undirected graph weighted by messages exchanged in either
    direction within the window; edges below ``min_weight`` are dropped.

    When ``users`` is given, only mentions among those users count and
    the node set is exactly ``users`` (isolated nodes kept). Otherwise
    the node set is every user observed in the window.
    """
    if min_weight < 1:
        raise ValueError("min_weight must be >= 1")
    keep = None if users is None else set(users)
    weights: Counter = Counter()
    observed: set[str] = set()
    for rec, m in mention_events(tweets, window):
        if keep is not None and (rec.sender not in keep or m not in keep):
            continue
        observed.add(rec.sender)
        observed.add(m)
        key = (rec.sender, m) if rec.sender <= m else (m, rec.sender)
        weights[key] += 1

    nodes = sorted(observed) if keep is None else sorted(keep)
    edges = {pair: w for pair, w in weights.items() if w >= min_weight}
    return WeightedInteractionGraph(nodes, edges)
