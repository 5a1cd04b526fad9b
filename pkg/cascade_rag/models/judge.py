"""JudgeScore and EvalRecord models."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .enums import Metric


@dataclass(frozen=True)
class JudgeScore:
    """One judge verdict. ``value`` is ``None`` when no verdict could be parsed."""
    metric: Metric
    value: float | None
    rationale: str = ""
    judge: str = "primary"
    capped: bool = False
    clamped: bool = False

    @property
    def missing(self) -> bool:
        return self.value is None

    @classmethod
    def from_dict(cls, data: dict) -> "JudgeScore":
        value = data.get("value")
        return cls(
            metric=Metric(data["metric"]),
            value=float(value) if value is not None else None,
            rationale=data.get("rationale", ""),
            judge=data.get("judge", "primary"),
            capped=bool(data.get("capped", False)),
            clamped=bool(data.get("clamped", False)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "value": self.value,
            "rationale": self.rationale,
            "judge": self.judge,
            "capped": self.capped,
            "clamped": self.clamped,
        }


@dataclass
class EvalRecord:
    """A question, its gold data, the generated answer and its judgements."""
    question_id: str
    question: str
    gold_answer: str
    gold_ids: list[str]
    answer: str
    retrieved_ids: list[str]
    retrieved_passages: list[str] = field(default_factory=list)
    category: str | None = None
    profile: str = ""
    seconds: float = 0.0
    scores: list[JudgeScore] = field(default_factory=list)

    def score(
        self, metric: Metric, *, judge: str = "primary", capped: bool = False
    ) -> float | None:
        for s in self.scores:
            if s.metric is metric and s.judge == judge and s.capped == capped:
                return s.value
        return None

    @classmethod
    def from_dict(cls, data: dict) -> "EvalRecord":
        return cls(
            question_id=str(data["question_id"]),
            question=data.get("question", ""),
            gold_answer=data.get("gold_answer", ""),
            gold_ids=[str(i) for i in data.get("gold_ids", [])],
            answer=data.get("answer", ""),
            retrieved_ids=[str(i) for i in data.get("retrieved_ids", [])],
            retrieved_passages=list(data.get("retrieved_passages", [])),
            category=data.get("category"),
            profile=data.get("profile", ""),
            seconds=float(data.get("seconds", 0.0)),
            scores=[JudgeScore.from_dict(s) for s in data.get("scores", [])],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "gold_ids": list(self.gold_ids),
            "answer": self.answer,
            "retrieved_ids": list(self.retrieved_ids),
            "retrieved_passages": list(self.retrieved_passages),
            "category": self.category,
            "profile": self.profile,
            "seconds": self.seconds,
            "scores": [s.to_dict() for s in self.scores],
        }
