"""Counter-based random streams shared by the simulation backends.

Every (agent, step, phase) triple gets its own splitmix64 stream derived
from the master seed, which makes simulation output independent of
agent processing order, thread count, and backend: the compiled kernel
implements byte-for-byte the same generator and draw protocol as this
module (the cross-backend equality test pins that).

Draw protocol per agent and step
  act stream (salt 0), neighbours visited in ascending index order:
    1 uniform for the send decision; if sending, the Poisson burst draw
    (Knuth's product method, a variable number of uniforms) followed by
    one Box-Muller normal (2 uniforms) per burst, or one normal per
    message in per-message mode.
  evolve stream (salt 1): 1 uniform for the reset decision.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

SALT_ACT = 0
SALT_EVOLVE = 1

_INV_2_53 = 2.0 ** -53
_TWO_PI = 6.283185307179586


def mix64(z: int) -> int:
    """splitmix64 finaliser."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def substream_state(seed: int, agent: int, step: int, salt: int) -> int:
    """Initial stream state for one (agent, step, phase)."""
    z = mix64(seed)
    z = mix64(z ^ mix64(((agent + 1) * GOLDEN) & MASK64))
    z = mix64(z ^ mix64(((step + 1) * GOLDEN) & MASK64))
    z = mix64(z ^ mix64(((salt + 1) * GOLDEN) & MASK64))
    return z


class SplitMix64:
    """Sequential splitmix64 stream from an explicit state."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def u01(self) -> float:
        """Uniform on [0, 1), 53-bit resolution."""
        return (self.next_u64() >> 11) * _INV_2_53

    def u01_open(self) -> float:
        """Uniform on (0, 1]; safe as a log() argument."""
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def normal(self) -> float:
        """Standard normal via Box-Muller (no spare caching)."""
        u1 = self.u01_open()
        u2 = self.u01()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)

    def poisson(self, lam: float) -> int:
        """Knuth's product method; fine for the small means used here."""
        if lam <= 0.0:
            return 0
        limit = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.u01()
            if p <= limit:
                return k
            k += 1


def stream(seed: int, agent: int, step: int, salt: int) -> SplitMix64:
    return SplitMix64(substream_state(seed, agent, step, salt))
