"""Simulation driver: per-agent action/evolution rules, the synchronous
step loop, and backend selection.

The compiled kernel (``moodnet.abm._simkernel``) and the pure-Python
loop below implement the identical draw protocol (see ``rng``) and
produce byte-identical logs; the kernel is picked automatically when
available. Each step, all agents act on the previous step's state, the
messages are delivered, and then all agents evolve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import SentimentScale, clamp_score
from .model import AgentModel, AgentProfile, AgentState, GlobalParams
from .rng import SALT_ACT, SALT_EVOLVE, SplitMix64, stream

try:
    from . import _simkernel
except ImportError:  # pure-Python fallback
    _simkernel = None

HAVE_KERNEL = _simkernel is not None
DEFAULT_BACKEND = "compiled" if HAVE_KERNEL else "python"


@dataclass(frozen=True)
class MessageLog:
    """Flat burst-level log of one simulation run. Steps are 1-based;
    in per-message noise mode each message is logged as its own burst
    of size 1."""

    users: tuple[str, ...]
    n_steps: int
    iterations_per_day: int
    steps: np.ndarray       # int32, 1..n_steps
    senders: np.ndarray     # int32 agent indices
    recipients: np.ndarray  # int32 agent indices
    bursts: np.ndarray      # int32 >= 1
    sentiments: np.ndarray  # float64, clamped to the scale

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n_messages(self) -> int:
        return int(self.bursts.sum())

    def day_of_step(self, step: int) -> int:
        return (step - 1) // self.iterations_per_day


def _emit(current: float, target: int, glob: GlobalParams,
          scale: SentimentScale, rng: SplitMix64, per_message: bool):
    """Burst and sentiment draws for one chosen recipient, in protocol
    order: Poisson burst first, then noise."""
    burst = 1 + rng.poisson(glob.mean_burst_size - 1.0)
    if per_message:
        return [(target, 1,
                 float(clamp_score(current + rng.normal() * glob.sentiment_noise,
                                   scale)))
                for _ in range(burst)]
    value = float(clamp_score(current + rng.normal() * glob.sentiment_noise,
                              scale))
    return [(target, burst, value)]


def agent_act(profile: AgentProfile,
              neighbours: Sequence[int],
              state: AgentState,
              glob: GlobalParams,
              scale: SentimentScale,
              rng: SplitMix64,
              per_message: bool = False) -> list[tuple[int, int, float]]:
    """One agent's action: replies to last step's senders and propagates
    to the rest (or initiates to everyone when nothing arrived), one
    independent decision per neighbour in ascending index order.

    Returns (recipient, burst_size, message_sentiment) triples.
    """
    out: list[tuple[int, int, float]] = []
    recent = state.recent_senders
    for j in neighbours:
        if recent:
            p = profile.p_reply if j in recent else profile.p_prop
        else:
            p = profile.p_init
        if rng.u01() < p:
            out.extend(_emit(state.current_sentiment, j, glob,
                             scale, rng, per_message))
    return out


def agent_evolve(profile: AgentProfile,
                 state: AgentState,
                 received: Sequence[tuple[int, float, int]],
                 glob: GlobalParams,
                 rng: SplitMix64) -> AgentState:
    """One agent's state transition given this step's incoming
    (sender, sentiment, message_count) bursts: reset to baseline with
    the reset probability, otherwise shift by the summed per-message
    contagion components; either way remember who just wrote."""
    if rng.u01() < glob.reset_probability:
        current = profile.baseline_sentiment
    else:
        sent_sum = 0.0
        count = 0
        for _, value, n in received:
            sent_sum += value * n
            count += n
        current = state.current_sentiment + (
            (sent_sum - count * profile.neutral_sentiment)
            * glob.contagion_factor)
    return AgentState(current, frozenset(s for s, _, _ in received))


def _run_python(model: AgentModel, n_steps: int, seed: int,
                per_message: bool, agent_order: Optional[Sequence[int]] = None):
    """Reference step loop. ``agent_order`` only reorders processing
    (for the synchronous-update metamorphic test); the log is always
    emitted in ascending agent order."""
    indptr, indices, prof = model.arrays()
    n = model.n_agents
    glob = model.global_params
    scale = model.scale
    profiles = [model.profiles[u] for u in model.users]
    neighbours = [list(map(int, indices[indptr[i]:indptr[i + 1]]))
                  for i in range(n)]
    states = [AgentState(profiles[i].baseline_sentiment, frozenset())
              for i in range(n)]
    order = list(range(n)) if agent_order is None else list(agent_order)

    steps_col: list[int] = []
    senders_col: list[int] = []
    rec_col: list[int] = []
    burst_col: list[int] = []
    sent_col: list[float] = []

    for step in range(1, n_steps + 1):
        actions: dict[int, list[tuple[int, int, float]]] = {}
        for i in order:
            rng = stream(seed, i, step, SALT_ACT)
            actions[i] = agent_act(profiles[i], neighbours[i], states[i],
                                   glob, scale, rng, per_message)
        inbox: list[list[tuple[int, float, int]]] = [[] for _ in range(n)]
        for i in range(n):  # log and deliver in ascending sender order
            for target, burst, value in actions[i]:
                steps_col.append(step)
                senders_col.append(i)
                rec_col.append(target)
                burst_col.append(burst)
                sent_col.append(value)
                inbox[target].append((i, value, burst))
        for i in order:
            rng = stream(seed, i, step, SALT_EVOLVE)
            states[i] = agent_evolve(profiles[i], states[i], inbox[i],
                                     glob, rng)

    return (np.array(steps_col, dtype=np.int32),
            np.array(senders_col, dtype=np.int32),
            np.array(rec_col, dtype=np.int32),
            np.array(burst_col, dtype=np.int32),
            np.array(sent_col, dtype=np.float64))


def simulate(model: AgentModel, days: int, seed: int,
             backend: str = "auto",
             noise_per_message: bool = False) -> MessageLog:
    """Run the model for ``days`` x iterations_per_day synchronous steps
    from the initial state (baseline sentiment, empty inboxes)."""
    if days < 1:
        raise ValueError("days must be >= 1")
    n_steps = days * model.global_params.iterations_per_day
    if backend == "auto":
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if not HAVE_KERNEL:
            raise RuntimeError("compiled kernel not available")
        indptr, indices, prof = model.arrays()
        glob = model.global_params
        cols = _simkernel.run_simulation(
            n_steps, seed, indptr, indices,
            prof["p_init"], prof["p_reply"], prof["p_prop"],
            prof["baseline"], prof["neutral"],
            glob.mean_burst_size, glob.contagion_factor,
            glob.reset_probability, glob.sentiment_noise,
            float(model.scale.min), float(model.scale.max),
            model.scale.integer_valued, noise_per_message)
    elif backend == "python":
        cols = _run_python(model, n_steps, seed, noise_per_message)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    steps, senders, recipients, bursts, sentiments = cols
    return MessageLog(model.users, n_steps,
                      model.global_params.iterations_per_day,
                      steps, senders, recipients, bursts, sentiments)
