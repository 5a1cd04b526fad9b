"""Passage model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .namespace import NamespaceLabel


@dataclass(frozen=True)
class Passage:
    """One retrievable text unit."""
    id: str
    text: str
    namespace: NamespaceLabel
    topic_tag: str | None = None
    format_tag: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")

    @classmethod
    def from_dict(cls, data: dict, namespace: NamespaceLabel | None = None) -> "Passage":
        """Build from a corpus record.

        *namespace* overrides the record's own ``namespace`` field; callers pass the
        label resolved against the configured set.
        """
        return cls(
            id=str(data.get("id", "")),
            text=data.get("text", ""),
            namespace=namespace or NamespaceLabel(data.get("namespace", "")),
            topic_tag=data.get("topic_tag") or None,
            format_tag=data.get("format_tag") or None,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "namespace": self.namespace.name,
            "topic_tag": self.topic_tag,
            "format_tag": self.format_tag,
        }

    def __repr__(self) -> str:
        return f"Passage(id={self.id!r}, namespace={self.namespace.name!r})"
