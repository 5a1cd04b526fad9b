"""QueryRecord model."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .namespace import NamespaceLabel


@dataclass(frozen=True)
class QueryRecord:
    """A question as it flows through the stages.

    Each stage returns a new record; ``stage_timings`` maps every finished
    stage to its seconds.
    """
    raw_query: str
    rewritten_query: str | None = None
    routed_namespaces: tuple[NamespaceLabel, ...] = ()
    stage_timings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "routed_namespaces", tuple(self.routed_namespaces))
        object.__setattr__(self, "stage_timings", MappingProxyType(dict(self.stage_timings)))

    @property
    def effective_query(self) -> str:
        """The rewritten query when present, otherwise the raw one."""
        return self.rewritten_query if self.rewritten_query is not None else self.raw_query

    def with_timing(self, stage: str, seconds: float) -> "QueryRecord":
        return replace(self, stage_timings={**self.stage_timings, stage: float(seconds)})

    def with_rewrite(self, rewritten: str) -> "QueryRecord":
        return replace(self, rewritten_query=rewritten)

    def with_routes(self, namespaces: tuple[NamespaceLabel, ...]) -> "QueryRecord":
        return replace(self, routed_namespaces=tuple(namespaces))
