"""Message envelope passed between node ports."""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from typing import Any, Optional

# Payloads are plain JSON values: scalar number, string, bool, or a
# key-value record (lists allowed for tallies and similar aggregates).
Payload = Any


@dataclass(frozen=True)
class Envelope:
    """One timestamped message travelling from a node egress to an ingress.

    Envelopes are immutable values; fan-out hands every ingress its own
    payload copy so state can never leak between branches.
    """

    time: int
    topic: str
    payload: Payload
    source: str
    port: int = 0
    corr: Optional[str] = None

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("envelope time must be non-negative")
        if self.port < 0:
            raise ValueError("egress index must be non-negative")

    def fork(self) -> "Envelope":
        """Copy for one delivery; mutable payloads are deep-copied."""
        if isinstance(self.payload, (dict, list)):
            return replace(self, payload=copy.deepcopy(self.payload))
        return self


def is_number(value) -> bool:
    """True for int/float payloads; bool is not a reading."""
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def topic_matches(pattern: str, topic: str) -> bool:
    """Exact topic match plus the single-level '+' wildcard."""
    p_segs = pattern.split("/")
    t_segs = topic.split("/")
    if len(p_segs) != len(t_segs):
        return False
    return all(p == "+" or p == t for p, t in zip(p_segs, t_segs))
