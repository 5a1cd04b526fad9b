"""Pipeline enumerations."""
from __future__ import annotations

from enum import Enum


class Stage(str, Enum):
    REWRITE = "rewrite"
    ROUTE = "route"
    DENSE = "dense"
    PRUNE = "prune"
    RERANK = "rerank"
    AGGREGATE = "aggregate"
    GENERATE = "generate"


class Metric(str, Enum):
    CORRECTNESS = "correctness"
    FAITHFULNESS = "faithfulness"

    @property
    def bounds(self) -> tuple[float, float]:
        return (-1.0, 2.0) if self is Metric.CORRECTNESS else (-1.0, 1.0)


class PromptKind(str, Enum):
    """What a chat request is for; backends may route on it, prompts never need parsing."""
    REWRITE = "rewrite"
    ROUTE = "route"
    GENERATE = "generate"
    JUDGE = "judge"
