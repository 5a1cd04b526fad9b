"""HTTP clients for the embedding, chat-completion and rerank services."""
from __future__ import annotations

import logging
from typing import Any, Sequence

from ..exceptions import APIError, DimensionMismatchError
from ..models.embedding import EmbeddingVector
from ..models.messages import ChatRequest, RerankRequest
from .base import HttpBackend, check_texts, order_rerank_scores

logger = logging.getLogger(__name__)


class RemoteEmbedder(HttpBackend):
    """
    Client for an OpenAI-style ``/embeddings`` endpoint.

    Vectors are L2-normalized on arrival, so dot product equals cosine
    similarity downstream. ``dimension`` is fixed by config or by the first
    response; every later vector must match it.
    """

    def __init__(self, endpoint: str, *, dimension: int | None = None, **kwargs: Any) -> None:
        super().__init__(endpoint, **kwargs)
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        texts = check_texts(texts)
        data = self._post({"model": self.model, "input": texts})
        try:
            rows = sorted(data["data"], key=lambda row: row.get("index", 0))
            vectors = [EmbeddingVector.normalized(row["embedding"]) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise APIError(f"Malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise APIError(f"Expected {len(texts)} embeddings, got {len(vectors)}")
        for vec in vectors:
            if self.dimension is None:
                self.dimension = vec.dimension
            elif vec.dimension != self.dimension:
                raise DimensionMismatchError(self.dimension, vec.dimension)
        return vectors


class RemoteChatClient(HttpBackend):
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def complete(self, request: ChatRequest) -> str:
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_content},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "stream": False,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        data = self._post(payload)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise APIError(f"Malformed chat response: {exc}") from exc


class RemoteReranker(HttpBackend):
    """Client for a Cohere-style ``/rerank`` endpoint."""

    def rerank(self, request: RerankRequest) -> list[tuple[int, float]]:
        data = self._post(
            {
                "model": self.model,
                "query": request.query,
                "documents": list(request.documents),
                "top_n": request.top_n,
            }
        )
        try:
            scores = [(int(r["index"]), float(r["relevance_score"])) for r in data["results"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise APIError(f"Malformed rerank response: {exc}") from exc
        seen: set[int] = set()
        for index, _ in scores:
            if not 0 <= index < len(request.documents) or index in seen:
                raise APIError(f"Rerank response has invalid index {index}")
            seen.add(index)
        return order_rerank_scores(scores, request.top_n)
