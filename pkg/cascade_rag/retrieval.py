"""Hybrid retrieval cascade: dense search, BM25 pruning, cross-encoder rerank.

Each stage takes the :class:`QueryRecord` and the previous stage's candidates
and returns a :class:`StageResult`; candidate ranks are renumbered from 1 at
every stage.
"""
from __future__ import annotations

import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .clients.base import Embedder, Reranker
from .config import PipelineConfig
from .exceptions import BackendError
from .models.candidate import RetrievalCandidate
from .models.messages import RerankRequest
from .models.query import QueryRecord
from .store.base import VectorStore
from .text import tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Bm25Params":
        return cls(k1=config.bm25_k1, b=config.bm25_b)


@dataclass(frozen=True)
class TokenizedDoc:
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "TokenizedDoc":
        return cls(tuple(tokenize(text)))

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class StageResult:
    candidates: tuple[RetrievalCandidate, ...]
    seconds: float
    degraded: bool = False
    scanned: int | None = None

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.candidates]


def bm25_scores(
    query_tokens: Sequence[str],
    docs: Sequence[TokenizedDoc],
    params: Bm25Params = Bm25Params(),
) -> list[float]:
    """Okapi BM25 of every doc, with document frequencies and average length
    taken from *docs* alone.

    IDF is ``ln((N - df + 0.5) / (df + 0.5) + 1)``, so scores are never
    negative. A repeated query token contributes once per occurrence.
    """
    n_docs = len(docs)
    if n_docs == 0:
        return []
    avgdl = sum(d.length for d in docs) / n_docs
    term_freqs = [Counter(d.tokens) for d in docs]
    df: Counter[str] = Counter()
    for tf in term_freqs:
        df.update(tf.keys())

    idf = {
        token: math.log((n_docs - df[token] + 0.5) / (df[token] + 0.5) + 1.0)
        for token in set(query_tokens)
    }
    scores: list[float] = []
    for doc, tf in zip(docs, term_freqs):
        norm = params.k1 * (1.0 - params.b + params.b * doc.length / avgdl) if avgdl else params.k1
        score = 0.0
        for token in query_tokens:
            freq = tf.get(token, 0)
            if freq:
                score += idf[token] * freq * (params.k1 + 1.0) / (freq + norm)
        scores.append(score)
    return scores


def _renumber(candidates: Sequence[RetrievalCandidate]) -> tuple[RetrievalCandidate, ...]:
    return tuple(c.with_rank(r) for r, c in enumerate(candidates, start=1))


def dense_stage(
    query: QueryRecord,
    config: PipelineConfig,
    store: VectorStore,
    embedder: Embedder,
    *,
    k: int | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> StageResult:
    """Embed the effective query and fetch the top ``dense_k`` from the routed namespaces."""
    started = clock()
    namespaces = query.routed_namespaces or tuple(config.namespace_set)
    (vector,) = embedder.embed([query.effective_query])
    result = store.search(namespaces, vector, k or config.dense_k)
    seconds = clock() - started
    logger.debug("dense: %d candidates from %d vectors in %.3fs",
                 len(result.candidates), result.scanned, seconds)
    return StageResult(candidates=result.candidates, seconds=seconds, scanned=result.scanned)


def prune_stage(
    query: QueryRecord,
    candidates: Sequence[RetrievalCandidate],
    config: PipelineConfig,
    *,
    k: int | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> StageResult:
    """Keep the top ``prune_k`` candidates by BM25 over the candidate set.

    Ties go to the higher dense score, then the lower passage id.
    """
    started = clock()
    if not candidates:
        return StageResult(candidates=(), seconds=clock() - started)
    docs = [TokenizedDoc.from_text(c.passage.text) for c in candidates]
    scores = bm25_scores(tokenize(query.effective_query), docs, Bm25Params.from_config(config))
    scored = [replace(c, lexical_score=s) for c, s in zip(candidates, scores)]
    scored.sort(key=lambda c: (-c.lexical_score, -c.dense_score, c.id))
    kept = _renumber(scored[:k or config.prune_k])
    return StageResult(candidates=kept, seconds=clock() - started)


def rerank_stage(
    query: QueryRecord,
    candidates: Sequence[RetrievalCandidate],
    config: PipelineConfig,
    reranker: Reranker,
    *,
    clock: Callable[[], float] = time.perf_counter,
) -> StageResult:
    """Reorder with the cross-encoder and keep the top ``rerank_k``.

    If the reranker is unreachable the first ``rerank_k`` candidates in their
    incoming (lexical) order are kept and the result is marked degraded.
    """
    started = clock()
    if not candidates:
        return StageResult(candidates=(), seconds=clock() - started)
    top_n = min(config.rerank_k, len(candidates))
    request = RerankRequest(
        query=query.effective_query,
        documents=tuple(c.passage.text for c in candidates),
        top_n=top_n,
    )
    try:
        ranked = reranker.rerank(request)
    except BackendError as exc:
        logger.warning("reranker unavailable, keeping lexical top %d: %s", top_n, exc)
        return StageResult(
            candidates=_renumber(candidates[:top_n]),
            seconds=clock() - started,
            degraded=True,
        )
    kept = [replace(candidates[i], rerank_score=score) for i, score in ranked[:top_n]]
    return StageResult(candidates=_renumber(kept), seconds=clock() - started)
