"""Request models for the chat and rerank backends."""
from __future__ import annotations

from dataclasses import dataclass

from .enums import PromptKind


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_content: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    # Sample index for repeated calls with the same prompt (routing votes).
    seed: int | None = None
    kind: PromptKind | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class RerankRequest:
    query: str
    documents: tuple[str, ...]
    top_n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))
        if not self.documents:
            raise ValueError("rerank needs at least one document")
        if not 1 <= self.top_n <= len(self.documents):
            raise ValueError(f"top_n must be in [1, {len(self.documents)}], got {self.top_n}")
