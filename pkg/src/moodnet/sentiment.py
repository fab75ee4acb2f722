"""User-level sentiment attributes, group comparisons with randomization
p-values, and moving-average-by-rank curves.

A user's attributes aggregate the sentiment scores of their outgoing
mention edges. The two strength attributes are divided by the user's
total outgoing-edge count (not just the positive or negative ones), so
mean = pos_strength - neg_strength and |mean| decomposes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import DateWindow, SentimentScale, TweetRecord
from .ingest import mention_events
from .parallel import pmap

ATTRIBUTE_NAMES = (
    "mean_sentiment", "mean_abs_sentiment",
    "pos_fraction", "zero_fraction", "neg_fraction",
    "avg_pos_strength", "avg_neg_strength",
)


@dataclass(frozen=True)
class UserSentimentAttributes:
    mean_sentiment: float
    mean_abs_sentiment: float
    pos_fraction: float
    zero_fraction: float
    neg_fraction: float
    avg_pos_strength: float
    avg_neg_strength: float
    edge_count: float  # integer per user; fractional after group means

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def user_attributes(edge_scores: Sequence[float]) -> UserSentimentAttributes:
    """The seven attributes over one user's outgoing-edge scores."""
    n = len(edge_scores)
    if n == 0:
        raise ValueError("no outgoing edges")
    scores = np.asarray(edge_scores, dtype=np.float64)
    pos_sum = float(scores[scores > 0].sum())
    neg_sum = float(-scores[scores < 0].sum())
    pos_strength = pos_sum / n
    neg_strength = neg_sum / n
    return UserSentimentAttributes(
        mean_sentiment=pos_strength - neg_strength,
        mean_abs_sentiment=pos_strength + neg_strength,
        pos_fraction=int((scores > 0).sum()) / n,
        zero_fraction=int((scores == 0).sum()) / n,
        neg_fraction=int((scores < 0).sum()) / n,
        avg_pos_strength=pos_strength,
        avg_neg_strength=neg_strength,
        edge_count=n,
    )


def edge_scores_by_user(tweets: Iterable[TweetRecord],
                        scale: SentimentScale,
                        window: Optional[DateWindow] = None,
                        users: Optional[Iterable[str]] = None,
                        ) -> dict[str, list[float]]:
    """Outgoing-edge score lists per sender: one score per mention event
    carrying a score on ``scale``. Self-mentions are excluded."""
    keep = None if users is None else set(users)
    out: dict[str, list[float]] = {}
    for rec, m in mention_events(tweets, window):
        if keep is not None and (rec.sender not in keep or m not in keep):
            continue
        s = rec.score(scale)
        if s is None:
            continue
        out.setdefault(rec.sender, []).append(float(s))
    return out


def attributes_by_user(tweets: Iterable[TweetRecord],
                       scale: SentimentScale,
                       window: Optional[DateWindow] = None,
                       users: Optional[Iterable[str]] = None,
                       ) -> dict[str, UserSentimentAttributes]:
    return {u: user_attributes(scores)
            for u, scores in edge_scores_by_user(tweets, scale, window, users).items()}


def group_means(attrs: Mapping[str, UserSentimentAttributes],
                subset: Iterable[str]) -> UserSentimentAttributes:
    """Unweighted arithmetic mean of each attribute over ``subset``."""
    subset = list(subset)
    if not subset:
        raise ValueError("empty subset")
    missing = [u for u in subset if u not in attrs]
    if missing:
        raise ValueError(f"users without attributes: {missing[:5]}")
    acc = {name: 0.0 for name in ATTRIBUTE_NAMES + ("edge_count",)}
    for u in subset:
        a = attrs[u]
        for name in acc:
            acc[name] += getattr(a, name)
    n = len(subset)
    return UserSentimentAttributes(**{k: v / n for k, v in acc.items()})


# Chunked subset sampling: the chunk size depends only on the population
# size, and every chunk reseeds from (seed, chunk_index), so results are
# identical for any worker count.
def _chunk_rows(pop_n: int) -> int:
    return max(1, min(1024, (1 << 24) // max(pop_n, 1)))


def _sample_means(values: np.ndarray, subset_size: int, n_samples: int,
                  seed: int) -> np.ndarray:
    pop_n = values.shape[0]
    rows = _chunk_rows(pop_n)
    chunks = [(c, min(rows, n_samples - c * rows))
              for c in range((n_samples + rows - 1) // rows)]

    def one_chunk(job):
        c, m = job
        rng = np.random.default_rng(np.random.SeedSequence((seed, c)))
        # uniform random k-subsets: k smallest of i.i.d. uniform keys
        keys = rng.random((m, pop_n))
        idx = np.argpartition(keys, subset_size - 1, axis=1)[:, :subset_size]
        return values[idx].mean(axis=1)

    return np.concatenate(pmap(one_chunk, chunks))


def randomization_pvalue(attrs: Mapping[str, UserSentimentAttributes],
                         subset_size: int,
                         observed: float,
                         attribute: str,
                         n_samples: int,
                         side: str,
                         seed: int = 0) -> float:
    """One-sided randomization p-value for a subset mean.

    Samples ``n_samples`` uniformly random subsets (without replacement
    within a subset, independent across subsets) and returns the
    fraction whose mean is at least as extreme as ``observed`` in the
    given direction; comparisons are inclusive.
    """
    if attribute not in ATTRIBUTE_NAMES + ("edge_count",):
        raise ValueError(f"unknown attribute {attribute!r}")
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    if not np.isfinite(observed):
        raise ValueError("observed must be finite")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    population = sorted(attrs)
    if not 0 < subset_size <= len(population):
        raise ValueError(f"subset_size {subset_size} outside 1..{len(population)}")
    values = np.array([getattr(attrs[u], attribute) for u in population])
    means = _sample_means(values, subset_size, n_samples, seed)
    if side == "lower":
        hits = int((means <= observed).sum())
    else:
        hits = int((means >= observed).sum())
    return hits / n_samples


def moving_average_by_rank(values_in_rank_order: Sequence[float],
                           window: int) -> np.ndarray:
    """Mean of each length-``window`` run; output length n - window + 1."""
    values = np.asarray(values_in_rank_order, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > values.shape[0]:
        raise ValueError(f"window {window} longer than series {values.shape[0]}")
    return np.lib.stride_tricks.sliding_window_view(values, window).mean(axis=1)
