"""moodnet: sentiment dynamics on evolving mention networks.

Computes dynamic-communicability broadcast/receive indices and
sentiment-usage statistics, detects and tracks communities with
conductance and endurance metrics, and simulates and calibrates an
agent-based model of sentiment contagion.
"""

from .core import (DateWindow, EvolvingMentionNetwork, L, MC, SCALES, SS,
                   SentimentScale, TweetRecord, WeightedInteractionGraph,
                   clamp_score)

__version__ = "0.1.0"

__all__ = [
    "DateWindow", "EvolvingMentionNetwork", "L", "MC", "SCALES", "SS",
    "SentimentScale", "TweetRecord", "WeightedInteractionGraph",
    "clamp_score", "__version__",
]
