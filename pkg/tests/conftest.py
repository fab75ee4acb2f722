"""Shared fixtures: record builders and a deterministic synthetic corpus
with planted communities and all three outlier archetypes."""

from __future__ import annotations

import json
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from moodnet.core import DateWindow, TweetRecord

WINDOW = DateWindow(date(2014, 10, 9), date(2014, 10, 15))

_counter = [0]


def tw(sender: str, mentions, ts: str = "2014-10-09T12:00:00+00:00",
       tweet_id: str | None = None, **scores) -> TweetRecord:
    _counter[0] += 1
    return TweetRecord(
        tweet_id=tweet_id or f"t{_counter[0]}",
        timestamp=datetime.fromisoformat(ts.replace("Z", "+00:00")),
        sender=sender,
        mentions=tuple(mentions),
        scores=scores,
    )


def synthetic_corpus(seed: int = 2014) -> list[dict]:
    """Three planted 10-user groups plus a frequency bot, a
    self-mentioner and a celebrity, over the seven-day window."""
    rng = np.random.default_rng(seed)
    groups = [[f"u{g}{i:02d}" for i in range(10)] for g in range(3)]
    users = [u for g in groups for u in g]
    bias = {0: 2, 1: 0, 2: -2}
    rows = []
    serial = [0]

    def emit(day_offset, sender, mentions, ss_bias):
        ts = (datetime(2014, 10, 9, tzinfo=timezone.utc)
              + timedelta(days=int(day_offset),
                          seconds=int(rng.integers(0, 86400))))
        ss = int(np.clip(round(ss_bias + rng.normal(0, 1.2)), -4, 4))
        serial[0] += 1
        rows.append({
            "tweet_id": f"s{serial[0]}",
            "timestamp": ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "sender": sender,
            "mentions": list(mentions),
            "mc": int(np.clip(ss * 6 + rng.integers(-2, 3), -25, 25)),
            "ss": ss,
            "l": float(np.clip(ss * 22 + rng.normal(0, 6), -100, 100)),
        })

    # a reciprocated ring keeps all thirty users in one core component
    for i, u in enumerate(users):
        v = users[(i + 1) % len(users)]
        emit(0, u, [v], 1)
        emit(0, v, [u], 1)
    for day in range(7):
        for g, members in enumerate(groups):
            for u in members:
                for _ in range(rng.poisson(2.5)):
                    v = members[int(rng.integers(0, len(members)))]
                    if v == u:
                        continue
                    emit(day, u, [v], bias[g])
            # sparse cross-group chatter
            if rng.random() < 0.5:
                other = groups[(g + 1) % 3]
                emit(day, members[0], [other[0]], 0)

    # frequency bot: 400 tweets inside one day
    for i in range(400):
        emit(1, "bot", [users[i % 30]], 0)
    # self-mentioner: 20 mentions, 15 of them self
    for i in range(20):
        emit(2, "selfie", ["selfie"] if i < 15 else [users[0]], 0)
    # celebrity: mentioned by everyone, never mentions back
    for u in users:
        emit(3, u, ["celeb"], 0)
    return rows


@pytest.fixture(scope="session")
def corpus_rows() -> list[dict]:
    return synthetic_corpus()


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory, corpus_rows) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "tweets.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for row in corpus_rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture(scope="session")
def corpus_records(corpus_path):
    from moodnet.ingest import parse_tweets

    with open(corpus_path, "rb") as fh:
        records, errors = parse_tweets(fh)
    assert not errors
    return records


def community_model(n: int = 28, seed: int = 17, iterations_per_day: int = 48,
                    contagion: float = 0.2, reset: float = 0.1,
                    noise: float = 1.0, burst: float = 1.5,
                    scale_kind: str = "mc", degree_p: float = 0.25,
                    baseline_range: tuple = (-2.0, 3.0),
                    neutral: float = 0.5):
    """Friends-chatting style model: subcritical message cascades and
    mood fluctuations anchored to baselines, sized like the 28-user
    community the original calibration targeted."""
    from moodnet.abm import AgentModel, AgentProfile, GlobalParams
    from moodnet.core import SCALES, WeightedInteractionGraph

    rng = np.random.default_rng(seed)
    users = [f"u{i:02d}" for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < degree_p:
                edges[(users[i], users[j])] = int(rng.integers(1, 30))
    for i in range(n - 1):  # keep the graph connected
        key = (users[i], users[i + 1])
        edges.setdefault(key, 1)
    profiles = {u: AgentProfile(
        p_init=float(rng.uniform(0.003, 0.02)),
        p_reply=float(rng.uniform(0.2, 0.5)),
        p_prop=float(rng.uniform(0.003, 0.03)),
        baseline_sentiment=float(rng.uniform(*baseline_range)),
        neutral_sentiment=neutral) for u in users}
    params = GlobalParams(
        iterations_per_day=iterations_per_day, mean_burst_size=burst,
        contagion_factor=contagion, reset_probability=reset,
        sentiment_noise=noise, neighbour_threshold=1)
    return AgentModel(WeightedInteractionGraph(users, edges), profiles,
                      params, SCALES[scale_kind])
