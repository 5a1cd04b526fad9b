"""RetrievalCandidate model."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

from .passage import Passage


@dataclass(frozen=True)
class RetrievalCandidate:
    """A passage carrying the scores of every stage it survived."""
    passage: Passage
    dense_score: float
    rank: int
    lexical_score: float | None = None
    rerank_score: float | None = None

    def __post_init__(self) -> None:
        if not -1.0 <= self.dense_score <= 1.0:
            raise ValueError(f"dense_score {self.dense_score} outside [-1, 1]")
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.lexical_score is not None and self.lexical_score < 0:
            raise ValueError("lexical_score must be non-negative")

    @property
    def id(self) -> str:
        return self.passage.id

    def with_rank(self, rank: int) -> "RetrievalCandidate":
        return replace(self, rank=rank)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.passage.id,
            "namespace": self.passage.namespace.name,
            "rank": self.rank,
            "dense_score": self.dense_score,
            "lexical_score": self.lexical_score,
            "rerank_score": self.rerank_score,
        }

    def __repr__(self) -> str:
        return f"RetrievalCandidate(id={self.id!r}, rank={self.rank}, dense={self.dense_score:.4f})"
