"""Client for a hosted, Pinecone-style namespaced vector index."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Iterable, Sequence

import numpy as np

from ..clients.base import HttpBackend
from ..exceptions import APIError, DimensionMismatchError
from ..models.candidate import RetrievalCandidate
from ..models.embedding import EmbeddingVector
from ..models.namespace import NamespaceLabel, NamespaceSet
from ..models.passage import Passage
from .base import SearchResult, rank_scores

logger = logging.getLogger(__name__)

UPSERT_BATCH = 100


class RemoteIndex(HttpBackend):
    """
    Namespaced index behind an HTTP service.

    ``endpoint`` is the index base URL; the client POSTs to
    ``/vectors/upsert``, ``/query`` and ``/describe_index_stats`` below it.
    Each namespace is queried separately and in parallel, then the results
    are merged with the same ordering rule as the local index.

    Parameters
    ----------
    endpoint : str
        Base URL of the index service.
    namespaces : NamespaceSet
        Configured namespaces.
    dimension : int
        Vector dimension of the index.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        namespaces: NamespaceSet,
        dimension: int,
        **kwargs: Any,
    ) -> None:
        super().__init__(endpoint.rstrip("/"), **kwargs)
        self.namespaces = namespaces
        self.dimension = dimension

    def _url(self, path: str) -> str:
        return f"{self.endpoint}/{path}"

    def upsert(
        self,
        namespace: NamespaceLabel | str,
        entries: Iterable[tuple[Passage, EmbeddingVector]],
    ) -> int:
        label = self.namespaces.resolve(namespace)
        vectors: list[dict[str, Any]] = []
        for passage, vector in entries:
            if vector.dimension != self.dimension:
                raise DimensionMismatchError(self.dimension, vector.dimension)
            vectors.append(
                {
                    "id": passage.id,
                    "values": vector.to_list(),
                    "metadata": {
                        "text": passage.text,
                        "topic_tag": passage.topic_tag or "",
                        "format_tag": passage.format_tag or "",
                    },
                }
            )
        for start in range(0, len(vectors), UPSERT_BATCH):
            batch = vectors[start:start + UPSERT_BATCH]
            self._post({"namespace": label.name, "vectors": batch}, url=self._url("vectors/upsert"))
        logger.debug("upserted %d vectors into remote namespace %s", len(vectors), label.name)
        return len({v["id"] for v in vectors})

    def _query_one(self, label: NamespaceLabel, query: EmbeddingVector, k: int):
        data = self._post(
            {
                "namespace": label.name,
                "vector": query.to_list(),
                "topK": k,
                "includeMetadata": True,
                "includeValues": False,
            },
            url=self._url("query"),
        )
        try:
            matches = data.get("matches", [])
            return [
                (
                    Passage(
                        id=str(m["id"]),
                        text=(m.get("metadata") or {}).get("text", ""),
                        namespace=label,
                        topic_tag=(m.get("metadata") or {}).get("topic_tag") or None,
                        format_tag=(m.get("metadata") or {}).get("format_tag") or None,
                    ),
                    float(m["score"]),
                )
                for m in matches
            ]
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise APIError(f"Malformed query response: {exc}") from exc

    def search(
        self,
        namespaces: Sequence[NamespaceLabel | str],
        query: EmbeddingVector,
        k: int,
    ) -> SearchResult:
        if k < 1:
            raise ValueError("k must be positive")
        if query.dimension != self.dimension:
            raise DimensionMismatchError(self.dimension, query.dimension)
        labels = list(dict.fromkeys(self.namespaces.resolve(n) for n in namespaces))
        if not labels:
            return SearchResult(candidates=(), scanned=0)
        with ThreadPoolExecutor(max_workers=len(labels)) as pool:
            per_namespace = list(pool.map(lambda label: self._query_one(label, query, k), labels))

        hits = [hit for group in per_namespace for hit in group]
        if not hits:
            return SearchResult(candidates=(), scanned=0)
        scores = np.clip(np.array([score for _, score in hits], dtype=np.float64), -1.0, 1.0)
        ids = [passage.id for passage, _ in hits]
        order = rank_scores(scores, ids, k)
        candidates = tuple(
            RetrievalCandidate(passage=hits[i][0], dense_score=float(scores[i]), rank=r)
            for r, i in enumerate(order, start=1)
        )
        counts = self.total_count()
        return SearchResult(candidates=candidates, scanned=sum(counts[label] for label in labels))

    def total_count(self) -> dict[NamespaceLabel, int]:
        data = self._post({}, url=self._url("describe_index_stats"))
        stats = data.get("namespaces", {}) if isinstance(data, dict) else {}
        counts = {label: 0 for label in self.namespaces}
        for name, entry in stats.items():
            label = self.namespaces.find(name)
            if label is not None:
                counts[label] = int(entry.get("vectorCount", 0))
        return counts

    def scanned_fraction(self, searched: Sequence[NamespaceLabel | str]) -> float:
        counts = self.total_count()
        total = sum(counts.values())
        if total == 0:
            raise ValueError("index is empty")
        labels = {self.namespaces.resolve(n) for n in searched}
        return sum(counts[label] for label in labels) / total
