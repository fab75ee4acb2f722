"""Simulated-moments calibration: the rho scoring function, the zooming
grid search over the six global parameters, and new-user what-if
scenarios.

rho is a weighted L1 distance between real and simulated moment
summaries; each grid-search stage re-grids the hyper-box around the
best cell and its immediate neighbours, while the two discrete
dimensions (iterations per day, neighbour threshold) freeze once a
single value wins two consecutive stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .abm.engine import simulate
from .abm.model import AgentModel, AgentProfile, GlobalParams
from .abm.moments import MomentSummary, summarize
from .core import SentimentScale
from .parallel import pmap

STRATEGIES = ("most_positive_3", "most_negative_3",
              "highest_reply_3", "lowest_reply_3")


@dataclass(frozen=True)
class RhoWeights:
    """Term weights of the rho score. The defaults put most emphasis on
    matching the volatility of daily community sentiment and least on
    the volatility of per-user daily counts."""

    w_count_mean: float = 1.0
    w_count_std: float = 0.1
    w_sent_mean: float = 10.0
    w_sent_std: float = 100.0

    def __post_init__(self):
        ws = (self.w_count_mean, self.w_count_std,
              self.w_sent_mean, self.w_sent_std)
        if any(w < 0 for w in ws):
            raise ValueError("weights must be >= 0")
        if all(w == 0 for w in ws):
            raise ValueError("at least one weight must be positive")


def rho_score(real: MomentSummary, sim: MomentSummary,
              weights: RhoWeights = RhoWeights()) -> float:
    """Weighted L1 distance between two moment summaries (>= 0, zero iff
    all compared moments coincide, symmetric, triangle inequality)."""
    if real.users != sim.users:
        raise ValueError("moment summaries cover different user sets")
    t_count_mean = float(np.abs(real.count_mean - sim.count_mean).sum())
    t_count_std = float(np.abs(real.count_std - sim.count_std).sum())
    t_sent_mean = abs(real.sent_mean - sim.sent_mean)
    t_sent_std = abs(real.sent_std - sim.sent_std)
    return (weights.w_count_mean * t_count_mean
            + weights.w_count_std * t_count_std
            + weights.w_sent_mean * t_sent_mean
            + weights.w_sent_std * t_sent_std)


def _run_seed(seed: int, index: int) -> int:
    # independent per-run seeds; stable regardless of worker count
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def make_history_builder(tweets, community, scale, window):
    """Model builder for grid searches over history.

    Construction only depends on iterations_per_day and the neighbour
    threshold, so models are cached on those two values and the
    remaining parameters are swapped in cheaply.
    """
    from .abm.model import build_model

    records = list(tweets)
    members = sorted(set(community))
    cache: dict[tuple[int, int], AgentModel] = {}

    def builder(params: GlobalParams) -> AgentModel:
        key = (params.iterations_per_day, params.neighbour_threshold)
        base = cache.get(key)
        if base is None:
            base = build_model(records, members, params, scale, window)
            cache[key] = base
        return base.with_params(params)

    return builder


def evaluate_params(model_builder: Callable[[GlobalParams], AgentModel],
                    params: GlobalParams,
                    real: MomentSummary,
                    runs: int,
                    seed: int,
                    weights: RhoWeights = RhoWeights(),
                    backend: str = "auto") -> float:
    """Mean rho over independent simulation runs at these parameters.

    The model is rebuilt for each parameter combination because the
    neighbour threshold and iterations per day both shape model
    construction; each run covers the real data's day span.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    model = model_builder(params)
    if model.users != real.users:
        raise ValueError("model users do not match the real summary")

    def one_run(index: int) -> float:
        log = simulate(model, real.n_days, _run_seed(seed, index),
                       backend=backend)
        return rho_score(real, summarize(log, real.n_days, model.users),
                         weights)

    return float(np.mean(pmap(one_run, range(runs))))


@dataclass(frozen=True)
class GridDim:
    """One search dimension: explicit candidate values, or a lo..hi
    range gridded with ``points`` values (integers if ``integer``)."""

    lo: float
    hi: float
    points: int = 5
    integer: bool = False
    values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(sorted(set(self.values)))
            if not vals:
                raise ValueError("empty value list")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "lo", vals[0])
            object.__setattr__(self, "hi", vals[-1])
        else:
            if self.lo > self.hi:
                raise ValueError(f"lo {self.lo} > hi {self.hi}")
            if self.points < 2 and self.lo != self.hi:
                raise ValueError("need >= 2 grid points on a proper range")

    @property
    def discrete(self) -> bool:
        return self.values is not None or self.integer

    def initial_grid(self) -> tuple[float, ...]:
        if self.values is not None:
            return self.values
        return self._linspace(self.lo, self.hi)

    def _linspace(self, lo: float, hi: float) -> tuple[float, ...]:
        if lo == hi:
            return ((int(lo) if self.integer else lo),)
        pts = np.linspace(lo, hi, self.points)
        if self.integer:
            return tuple(sorted(set(int(round(x)) for x in pts)))
        return tuple(float(x) for x in pts)

    def refined(self, grid: Sequence[float], best: float) -> tuple[float, ...]:
        """Grid over the span from one cell below to one above the best."""
        i = list(grid).index(best)
        lo = grid[max(0, i - 1)]
        hi = grid[min(len(grid) - 1, i + 1)]
        if self.values is not None:
            return tuple(v for v in grid[max(0, i - 1):i + 2])
        return self._linspace(lo, hi)


# iterations per day: successive doublings of 24, capped at 1536
ITERATIONS_GRID = tuple(24 * 2 ** m for m in range(7))

NOISE_RANGE_BY_SCALE = {"mc": 2.5, "ss": 1.8, "l": 13.0}


@dataclass(frozen=True)
class ParamRanges:
    """Search ranges for the six global parameters."""

    iterations_per_day: GridDim = GridDim(24, 1536, values=ITERATIONS_GRID)
    mean_burst_size: GridDim = GridDim(1.1, 2.8)
    contagion_factor: GridDim = GridDim(0.0, 0.5)
    reset_probability: GridDim = GridDim(0.0, 0.5)
    sentiment_noise: GridDim = GridDim(0.0, 2.5)
    neighbour_threshold: GridDim = GridDim(1, 60, integer=True)

    @classmethod
    def defaults_for(cls, scale: SentimentScale) -> "ParamRanges":
        return cls(sentiment_noise=GridDim(0.0, NOISE_RANGE_BY_SCALE[scale.kind]))

    def dims(self) -> tuple[tuple[str, GridDim], ...]:
        # canonical order must match GlobalParams.values_tuple
        return (
            ("iterations_per_day", self.iterations_per_day),
            ("mean_burst_size", self.mean_burst_size),
            ("contagion_factor", self.contagion_factor),
            ("reset_probability", self.reset_probability),
            ("sentiment_noise", self.sentiment_noise),
            ("neighbour_threshold", self.neighbour_threshold),
        )


def _params_from_cell(cell: Mapping[str, float]) -> GlobalParams:
    return GlobalParams(
        iterations_per_day=int(cell["iterations_per_day"]),
        mean_burst_size=float(cell["mean_burst_size"]),
        contagion_factor=float(cell["contagion_factor"]),
        reset_probability=float(cell["reset_probability"]),
        sentiment_noise=float(cell["sentiment_noise"]),
        neighbour_threshold=int(cell["neighbour_threshold"]),
    )


@dataclass(frozen=True)
class StageTrace:
    stage: int
    grids: dict[str, tuple[float, ...]]
    cells: tuple[tuple[tuple[float, ...], float], ...]  # (values, score)
    best_values: tuple[float, ...]
    best_score: float

    def as_dict(self) -> dict:
        names = [name for name, _ in _DIM_ORDER]
        return {
            "stage": self.stage,
            "grids": {k: list(v) for k, v in self.grids.items()},
            "cells": [{"params": dict(zip(names, vals)), "rho": score}
                      for vals, score in self.cells],
            "best": dict(zip(names, self.best_values)),
            "best_rho": self.best_score,
        }


_DIM_ORDER = ParamRanges().dims()


@dataclass(frozen=True)
class GridSearchResult:
    best_params: GlobalParams
    best_score: float
    stages: tuple[StageTrace, ...]

    def as_dict(self) -> dict:
        return {
            "best_params": self.best_params.as_dict(),
            "best_rho": self.best_score,
            "stages": [s.as_dict() for s in self.stages],
        }


def grid_search(model_builder: Callable[[GlobalParams], AgentModel],
                ranges: ParamRanges,
                real: MomentSummary,
                stages: int = 5,
                runs_per_cell: int = 50,
                seed: int = 0,
                weights: RhoWeights = RhoWeights(),
                evaluate_fn: Optional[Callable[[GlobalParams, int], float]] = None,
                backend: str = "auto") -> GridSearchResult:
    """Zooming grid search; returns the best parameters, their mean rho
    and the full per-stage trace.

    Ties go to the lexicographically smallest parameter tuple. Cells
    whose simulations degenerate (no messages on enough days to form
    moments) score +inf and stay in the trace. ``evaluate_fn`` replaces
    the simulation-based objective, for synthetic objectives and tests.
    """
    if stages < 1:
        raise ValueError("stages must be >= 1")
    dims = ranges.dims()
    grids: dict[str, tuple[float, ...]] = {
        name: dim.initial_grid() for name, dim in dims}
    for name, grid in grids.items():
        if not grid:
            raise ValueError(f"empty grid for {name}")
    frozen: set[str] = set()
    last_best: dict[str, float] = {}
    streak: dict[str, int] = {name: 0 for name, _ in dims}

    traces: list[StageTrace] = []
    best_overall: Optional[tuple[float, tuple, GlobalParams]] = None

    for stage in range(stages):
        names = [name for name, _ in dims]
        cells = list(product(*(grids[name] for name in names)))
        scored: list[tuple[tuple, float]] = []
        best_here: Optional[tuple[float, tuple, GlobalParams]] = None
        for cell_index, values in enumerate(cells):
            params = _params_from_cell(dict(zip(names, values)))
            cell_seed = int(np.random.SeedSequence(
                (seed, stage, cell_index)).generate_state(1)[0])
            if evaluate_fn is not None:
                score = float(evaluate_fn(params, cell_seed))
            else:
                try:
                    score = evaluate_params(model_builder, params, real,
                                            runs_per_cell, cell_seed,
                                            weights, backend)
                except ValueError:
                    score = math.inf
            scored.append((values, score))
            key = (score, params.values_tuple())
            if best_here is None or key < (best_here[0], best_here[1]):
                best_here = (score, params.values_tuple(), params)

        assert best_here is not None
        best_score, best_tuple, best_params = best_here
        traces.append(StageTrace(
            stage=stage,
            grids={k: tuple(v) for k, v in grids.items()},
            cells=tuple(scored),
            best_values=best_tuple,
            best_score=best_score,
        ))
        if best_overall is None or (best_score, best_tuple) < (
                best_overall[0], best_overall[1]):
            best_overall = best_here

        if stage == stages - 1:
            break
        best_by_name = dict(zip(names, best_tuple))
        for name, dim in dims:
            if name in frozen:
                continue
            value = best_by_name[name]
            if dim.discrete:
                streak[name] = streak[name] + 1 \
                    if last_best.get(name) == value else 1
                last_best[name] = value
                if streak[name] >= 2:
                    frozen.add(name)
                    grids[name] = (value,)
                    continue
            grids[name] = dim.refined(grids[name], value)

    assert best_overall is not None
    return GridSearchResult(best_overall[2], best_overall[0], tuple(traces))


def _community_sentiment_level(model: AgentModel) -> float:
    # profiles share one neutral level: the mean of all community messages
    return model.profiles[model.users[0]].neutral_sentiment


def _pick_neighbours(model: AgentModel, strategy: str) -> tuple[str, str, str]:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    attr, reverse = {
        "most_positive_3": ("baseline_sentiment", True),
        "most_negative_3": ("baseline_sentiment", False),
        "highest_reply_3": ("p_reply", True),
        "lowest_reply_3": ("p_reply", False),
    }[strategy]
    sign = -1.0 if reverse else 1.0
    ranked = sorted(model.users,
                    key=lambda u: (sign * getattr(model.profiles[u], attr), u))
    return tuple(ranked[:3])


def scenario_new_user(model: AgentModel, strategy: str,
                      multiplier: float = 3.0,
                      new_user_id: str = "new-user") -> AgentModel:
    """Attach one new agent to the three users picked by ``strategy``
    (ties by user id). Its behaviour probabilities are ``multiplier``
    times the community maxima, capped at 1; its baseline and neutral
    sentiment equal the existing community sentiment level. Existing
    profiles are untouched."""
    if model.n_agents < 3:
        raise ValueError("community needs at least 3 users")
    if new_user_id in set(model.users):
        raise ValueError(f"user id {new_user_id!r} already present")
    chosen = _pick_neighbours(model, strategy)
    level = _community_sentiment_level(model)
    cap = lambda p: min(1.0, multiplier * p)  # noqa: E731
    new_profile = AgentProfile(
        p_init=cap(max(p.p_init for p in model.profiles.values())),
        p_reply=cap(max(p.p_reply for p in model.profiles.values())),
        p_prop=cap(max(p.p_prop for p in model.profiles.values())),
        baseline_sentiment=level,
        neutral_sentiment=level,
    )
    edges = dict(model.graph.edges)
    # weight is irrelevant to the dynamics; record the threshold weight
    for u in chosen:
        key = (u, new_user_id) if u <= new_user_id else (new_user_id, u)
        edges[key] = model.global_params.neighbour_threshold
    graph = type(model.graph)(list(model.users) + [new_user_id], edges)
    profiles = dict(model.profiles)
    profiles[new_user_id] = new_profile
    return AgentModel(graph, profiles, model.global_params, model.scale,
                      model.baseline_fallbacks)


@dataclass(frozen=True)
class ScenarioMetrics:
    activity_mean: float   # mean daily message count
    activity_std: float    # std of daily message counts
    sentiment_mean: float  # mean daily community sentiment
    sentiment_std: float   # std of daily community sentiment

    def as_dict(self) -> dict:
        return {
            "activity_mean": self.activity_mean,
            "activity_std": self.activity_std,
            "sentiment_mean": self.sentiment_mean,
            "sentiment_std": self.sentiment_std,
        }


def _community_metrics(log, days: int) -> ScenarioMetrics:
    day_idx = (log.steps - 1) // log.iterations_per_day
    day_msgs = np.zeros(days)
    day_sent = np.zeros(days)
    np.add.at(day_msgs, day_idx, log.bursts)
    np.add.at(day_sent, day_idx, log.bursts * log.sentiments)
    active = day_msgs > 0
    if int(active.sum()) >= 2:
        daily = day_sent[active] / day_msgs[active]
        s_mean, s_std = float(daily.mean()), float(daily.std(ddof=1))
    elif int(active.sum()) == 1:
        daily = day_sent[active] / day_msgs[active]
        s_mean, s_std = float(daily.mean()), 0.0
    else:
        s_mean, s_std = 0.0, 0.0
    return ScenarioMetrics(float(day_msgs.mean()),
                           float(day_msgs.std(ddof=1)),
                           s_mean, s_std)


def scenario_compare(model: AgentModel,
                     strategies: Iterable[str] = STRATEGIES,
                     runs: int = 100,
                     seed: int = 0,
                     days: int = 30,
                     multiplier: float = 3.0,
                     common_random: bool = True,
                     backend: str = "auto") -> dict[str, ScenarioMetrics]:
    """Average community metrics per strategy over ``runs`` runs, plus
    the unmodified model under the key "baseline".

    With ``common_random`` (default) every arm reuses the same per-run
    seeds, which cancels most run-to-run noise out of the comparison.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    arms = {"baseline": model}
    for strategy in strategies:
        arms[strategy] = scenario_new_user(model, strategy, multiplier)

    results = {}
    for arm_index, (name, arm_model) in enumerate(arms.items()):
        salt = 0 if common_random else arm_index

        def one_run(r: int, _m=arm_model, _salt=salt) -> ScenarioMetrics:
            run_seed = int(np.random.SeedSequence(
                (seed, _salt, r)).generate_state(1)[0])
            log = simulate(_m, days, run_seed, backend=backend)
            return _community_metrics(log, days)

        metrics = pmap(one_run, range(runs))
        results[name] = ScenarioMetrics(
            activity_mean=float(np.mean([m.activity_mean for m in metrics])),
            activity_std=float(np.mean([m.activity_std for m in metrics])),
            sentiment_mean=float(np.mean([m.sentiment_mean for m in metrics])),
            sentiment_std=float(np.mean([m.sentiment_std for m in metrics])),
        )
    return results
