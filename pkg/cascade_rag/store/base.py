"""Vector store contract and shared ranking helper."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from ..models.candidate import RetrievalCandidate
from ..models.embedding import EmbeddingVector
from ..models.namespace import NamespaceLabel
from ..models.passage import Passage


@dataclass(frozen=True)
class SearchResult:
    """Ranked candidates plus the number of stored vectors that were scored."""
    candidates: tuple[RetrievalCandidate, ...]
    scanned: int


@runtime_checkable
class VectorStore(Protocol):
    dimension: int

    def upsert(
        self,
        namespace: NamespaceLabel | str,
        entries: Iterable[tuple[Passage, EmbeddingVector]],
    ) -> int:
        ...

    def search(
        self,
        namespaces: Sequence[NamespaceLabel | str],
        query: EmbeddingVector,
        k: int,
    ) -> SearchResult:
        ...

    def total_count(self) -> dict[NamespaceLabel, int]:
        ...

    def scanned_fraction(self, searched: Sequence[NamespaceLabel | str]) -> float:
        ...


def rank_scores(scores: np.ndarray, ids: Sequence[str], k: int) -> list[int]:
    """Positions of the top-*k* scores, descending, ties broken by ascending id.

    Only entries at or above the k-th largest score are sorted, so every entry
    tied with the cut-off competes on id.
    """
    if len(ids) <= k:
        pool = range(len(ids))
    else:
        threshold = np.partition(scores, len(ids) - k)[len(ids) - k]
        pool = np.flatnonzero(scores >= threshold).tolist()
    return sorted(pool, key=lambda i: (-float(scores[i]), ids[i]))[:k]
