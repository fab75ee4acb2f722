"""Agent-based model of sentiment contagion on a static interaction
graph, with a compiled stepping kernel and a pure-Python fallback."""

from .engine import (DEFAULT_BACKEND, HAVE_KERNEL, MessageLog, agent_act,
                     agent_evolve, simulate)
from .model import (AgentModel, AgentProfile, AgentState, GlobalParams,
                    build_model, iteration_window)
from .moments import MomentSummary, log_to_records, moments_from_history, summarize

__all__ = [
    "AgentModel", "AgentProfile", "AgentState", "GlobalParams",
    "MessageLog", "MomentSummary", "DEFAULT_BACKEND", "HAVE_KERNEL",
    "agent_act", "agent_evolve", "build_model", "iteration_window",
    "log_to_records", "moments_from_history", "simulate", "summarize",
]
