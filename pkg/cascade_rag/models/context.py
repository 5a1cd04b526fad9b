"""AggregatedContext model."""
from __future__ import annotations

from dataclasses import dataclass

SEPARATOR = "\n\n"


@dataclass(frozen=True)
class AggregatedContext:
    passages: tuple[tuple[str, str], ...]
    total_tokens: int
    truncated: bool

    @property
    def ids(self) -> list[str]:
        return [pid for pid, _ in self.passages]

    @property
    def text(self) -> str:
        """Passage texts separated by one blank line."""
        return SEPARATOR.join(text for _, text in self.passages)

    def __repr__(self) -> str:
        return (
            f"AggregatedContext(passages={len(self.passages)}, "
            f"tokens={self.total_tokens}, truncated={self.truncated})"
        )
