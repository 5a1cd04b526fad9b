"""AnswerTrace model: the per-query record written by runs and read by evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass
class AnswerTrace:
    """Everything one ``run_query`` call observed.

    Filled in stage by stage, so a failed query still carries its partial trace.
    """
    raw_query: str
    profile: str
    question_id: str | None = None
    rewritten_query: str | None = None
    routed_namespaces: list[str] = field(default_factory=list)
    scanned_fraction: float | None = None
    stage_ids: dict[str, list[str]] = field(default_factory=dict)
    context_tokens: int | None = None
    context_truncated: bool | None = None
    answer: str | None = None
    timings: dict[str, float] = field(default_factory=dict)
    total_seconds: float = 0.0
    degraded: dict[str, bool] = field(default_factory=dict)
    error: str | None = None
    error_stage: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def final_ids(self) -> list[str]:
        """Ids of the passages handed to generation (last retrieval stage that ran)."""
        for stage in ("rerank", "prune", "dense"):
            if stage in self.stage_ids:
                return list(self.stage_ids[stage])
        return []

    @property
    def stage_seconds(self) -> float:
        return sum(self.timings.values())

    @classmethod
    def from_dict(cls, data: dict) -> "AnswerTrace":
        return cls(
            raw_query=data.get("raw_query", ""),
            profile=data.get("profile", ""),
            question_id=data.get("question_id"),
            rewritten_query=data.get("rewritten_query"),
            routed_namespaces=list(data.get("routed_namespaces", [])),
            scanned_fraction=data.get("scanned_fraction"),
            stage_ids={k: list(v) for k, v in data.get("stage_ids", {}).items()},
            context_tokens=data.get("context_tokens"),
            context_truncated=data.get("context_truncated"),
            answer=data.get("answer"),
            timings={k: float(v) for k, v in data.get("timings", {}).items()},
            total_seconds=float(data.get("total_seconds", 0.0)),
            degraded={k: bool(v) for k, v in data.get("degraded", {}).items()},
            error=data.get("error"),
            error_stage=data.get("error_stage"),
        )

    def to_dict(self, *, timings: bool = True) -> dict[str, Any]:
        """Serialize; timings are rounded to two decimals, or dropped entirely."""
        data: dict[str, Any] = {
            "question_id": self.question_id,
            "profile": self.profile,
            "raw_query": self.raw_query,
            "rewritten_query": self.rewritten_query,
            "routed_namespaces": list(self.routed_namespaces),
            "scanned_fraction": self.scanned_fraction,
            "stage_ids": {k: list(v) for k, v in self.stage_ids.items()},
            "context_tokens": self.context_tokens,
            "context_truncated": self.context_truncated,
            "answer": self.answer,
            "degraded": dict(sorted(self.degraded.items())),
            "error": self.error,
            "error_stage": self.error_stage,
        }
        if timings:
            data["timings"] = {k: round(v, 2) for k, v in self.timings.items()}
            data["total_seconds"] = round(self.total_seconds, 2)
        return data

    def to_json(self, *, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings=timings), ensure_ascii=False, sort_keys=True)

    def __repr__(self) -> str:
        return (
            f"AnswerTrace(question_id={self.question_id!r}, profile={self.profile!r}, "
            f"ok={self.ok}, seconds={self.total_seconds:.2f})"
        )
