"""Benchmark models: question categories, tagged Q&A items and stratum allocations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

Stratum = tuple[str, str]


@dataclass(frozen=True)
class QuestionCategory:
    name: str
    required_docs: int
    description: str


_CATEGORIES = (
    QuestionCategory(
        "Multi-aspect", 2,
        "A question about two different aspects of the same entity or concept. The first "
        "document covers the first aspect, the second document covers the second aspect.",
    ),
    QuestionCategory(
        "Comparison", 2,
        "A question comparing two related entities or concepts by a common, meaningful "
        "attribute. Each document provides information about one of the two.",
    ),
    QuestionCategory(
        "Temporal-evolution", 2,
        "A question about how something changed or developed over time. The first document "
        "covers the earlier period or initial state, the second the later period or final state.",
    ),
    QuestionCategory(
        "Problem-solution", 2,
        "A question about a problem and its potential solutions. The first document details "
        "the problem and its implications, the second explores solutions or mitigations.",
    ),
    QuestionCategory(
        "Procedural", 1,
        "A question asking how to do something; the answer is an ordered list of steps.",
    ),
    QuestionCategory(
        "Causal", 1,
        "A question about why something happens; the answer explains the mechanism.",
    ),
    QuestionCategory(
        "Quantitative", 1,
        "A question seeking numbers, statistics or measurements supported by data.",
    ),
    QuestionCategory(
        "Verification", 1,
        "A question asking to confirm or deny mixed claims, at least one true and one false.",
    ),
)

CATEGORIES: dict[str, QuestionCategory] = {c.name.casefold(): c for c in _CATEGORIES}


def category(name: str) -> QuestionCategory | None:
    """Look up a category by name, ignoring case and hyphen/space/underscore differences."""
    key = name.strip().casefold().replace("_", "-").replace(" ", "-").replace("‐", "-")
    return CATEGORIES.get(key)


@dataclass(frozen=True)
class BenchmarkItem:
    """A tagged Q&A pair eligible for (or drawn into) the benchmark."""
    question_id: str
    question: str
    answer: str
    category: str
    document_ids: tuple[str, ...]
    topic: str
    format: str

    @property
    def stratum(self) -> Stratum:
        return (self.topic, self.format)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkItem":
        return cls(
            question_id=str(data["question_id"]),
            question=data.get("question", ""),
            answer=data.get("answer", ""),
            category=data.get("category", ""),
            document_ids=tuple(str(d) for d in data.get("document_ids", [])),
            topic=data.get("topic", ""),
            format=data.get("format", ""),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "answer": self.answer,
            "category": self.category,
            "document_ids": list(self.document_ids),
            "topic": self.topic,
            "format": self.format,
        }


@dataclass(frozen=True)
class StratumAllocation:
    stratum: Stratum
    candidate_count: int
    raw: int
    allocated: int
