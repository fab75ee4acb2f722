"""Moment summaries: the statistics through which simulated runs are
compared with real history (per-user daily message-count mean/std and
community daily-sentiment mean/std).

Standard deviations are sample (n-1) throughout. Days without any
message are skipped in the sentiment moments, never imputed as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, time, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from ..core import DateWindow, SentimentScale, TweetRecord
from ..ingest import mention_events
from .engine import MessageLog


@dataclass(frozen=True)
class MomentSummary:
    users: tuple[str, ...]
    count_mean: np.ndarray  # per-user mean daily sent messages
    count_std: np.ndarray   # per-user std of daily sent messages
    sent_mean: float        # mean of daily community sentiment
    sent_std: float         # std of daily community sentiment
    n_days: int

    def __post_init__(self):
        object.__setattr__(self, "count_mean",
                           np.asarray(self.count_mean, dtype=np.float64))
        object.__setattr__(self, "count_std",
                           np.asarray(self.count_std, dtype=np.float64))
        if len(self.users) < 1:
            raise ValueError("need at least one user")
        if self.count_mean.shape != (len(self.users),) \
                or self.count_std.shape != (len(self.users),):
            raise ValueError("count arrays must match the user list")
        if (self.count_std < 0).any() or self.sent_std < 0:
            raise ValueError("standard deviations must be >= 0")

    @property
    def n_users(self) -> int:
        return len(self.users)

    def as_dict(self) -> dict:
        return {
            "users": list(self.users),
            "count_mean": [float(x) for x in self.count_mean],
            "count_std": [float(x) for x in self.count_std],
            "sent_mean": self.sent_mean,
            "sent_std": self.sent_std,
            "n_days": self.n_days,
        }


def _moments(users: Sequence[str], counts: np.ndarray,
             day_sent_sum: np.ndarray, day_msgs: np.ndarray,
             n_days: int) -> MomentSummary:
    active = day_msgs > 0
    if int(active.sum()) < 2:
        raise ValueError("fewer than 2 days with messages: "
                         "sentiment moments undefined")
    daily_sent = day_sent_sum[active] / day_msgs[active]
    return MomentSummary(
        users=tuple(users),
        count_mean=counts.mean(axis=1),
        count_std=counts.std(axis=1, ddof=1),
        sent_mean=float(daily_sent.mean()),
        sent_std=float(daily_sent.std(ddof=1)),
        n_days=n_days,
    )


def summarize(log: MessageLog, days: int,
              users: Sequence[str]) -> MomentSummary:
    """Moment summary of one simulated run over a ``days`` horizon.

    Bursts are expanded: a burst of size b counts as b sent messages
    and contributes b copies of its sentiment to that day's
    message-weighted community mean.
    """
    if days < 2:
        raise ValueError("need days >= 2 for standard deviations")
    users = tuple(users)
    if users != log.users:
        raise ValueError("user list does not match the log")
    n = len(users)
    day_idx = (log.steps - 1) // log.iterations_per_day
    if len(log) and int(day_idx.max()) >= days:
        raise ValueError("log extends past the requested day span")
    counts = np.zeros((n, days))
    np.add.at(counts, (log.senders, day_idx), log.bursts)
    day_msgs = np.zeros(days)
    day_sent = np.zeros(days)
    np.add.at(day_msgs, day_idx, log.bursts)
    np.add.at(day_sent, day_idx, log.bursts * log.sentiments)
    return _moments(users, counts, day_sent, day_msgs, days)


def moments_from_history(tweets: Iterable[TweetRecord],
                         community: Iterable[str],
                         window: DateWindow,
                         scale: SentimentScale) -> MomentSummary:
    """Moment summary of a community's real message history.

    Counts cover all internal mention messages; the daily sentiment
    mean covers the scored ones.
    """
    users = tuple(sorted(set(community)))
    index = {u: i for i, u in enumerate(users)}
    n_days = window.n_days
    counts = np.zeros((len(users), n_days))
    day_msgs = np.zeros(n_days)
    day_scored = np.zeros(n_days)
    day_sent = np.zeros(n_days)
    for rec, m in mention_events(tweets, window):
        i = index.get(rec.sender)
        if i is None or m not in index:
            continue
        d = window.day_index(rec.day)
        counts[i, d] += 1
        day_msgs[d] += 1
        s = rec.score(scale)
        if s is not None:
            day_scored[d] += 1
            day_sent[d] += s
    return _moments(users, counts, day_sent, day_scored, n_days)


def log_to_records(log: MessageLog, window: DateWindow,
                   scale: SentimentScale) -> list[TweetRecord]:
    """Replay a simulated log as tweet records (one record per message),
    timestamped so each lands in the iteration window of its step."""
    if window.n_days * log.iterations_per_day < log.n_steps:
        raise ValueError("window shorter than the simulated span")
    ipd = log.iterations_per_day
    records = []
    serial = 0
    for step, s, r, burst, value in zip(log.steps, log.senders, log.recipients,
                                        log.bursts, log.sentiments):
        day, slot = divmod(int(step) - 1, ipd)
        # earliest whole second inside this iteration window
        seconds = -((-slot * 86400) // ipd)
        ts = datetime.combine(window.start + timedelta(days=day), time(),
                              tzinfo=timezone.utc) + timedelta(seconds=seconds)
        score = int(value) if scale.integer_valued else float(value)
        for _ in range(int(burst)):
            records.append(TweetRecord(
                tweet_id=f"sim-{serial}",
                timestamp=ts,
                sender=log.users[int(s)],
                mentions=(log.users[int(r)],),
                scores={scale.kind: score},
            ))
            serial += 1
    return records
