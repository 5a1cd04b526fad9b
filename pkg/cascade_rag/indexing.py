"""Embed passages into an index and open the configured index for querying."""
from __future__ import annotations

import logging
from itertools import groupby
from typing import Iterator, Sequence

from .clients.base import Embedder, RetryPolicy
from .config import PipelineConfig
from .exceptions import ConfigError, DataError
from .models.embedding import EmbeddingVector
from .models.namespace import NamespaceSet
from .models.passage import Passage
from .store.base import VectorStore
from .store.local import LocalIndex
from .store.remote import RemoteIndex

logger = logging.getLogger(__name__)


def embed_passages(
    passages: Sequence[Passage],
    embedder: Embedder,
    batch_size: int = 64,
) -> Iterator[tuple[Passage, EmbeddingVector]]:
    """Yield ``(passage, vector)`` pairs, calling the embedder in batches."""
    for start in range(0, len(passages), batch_size):
        batch = passages[start:start + batch_size]
        vectors = embedder.embed([p.text for p in batch])
        if len(vectors) != len(batch):
            raise DataError(f"embedder returned {len(vectors)} vectors for {len(batch)} texts")
        yield from zip(batch, vectors)


def build_index(
    passages: Sequence[Passage],
    embedder: Embedder,
    namespaces: NamespaceSet,
    *,
    batch_size: int = 64,
    store: VectorStore | None = None,
) -> VectorStore:
    """Embed *passages* and upsert them per namespace.

    Without *store* a new :class:`LocalIndex` is created, sized by the first vector.
    """
    pairs = list(embed_passages(passages, embedder, batch_size))
    if not pairs:
        raise DataError("empty corpus")
    if store is None:
        store = LocalIndex(namespaces, pairs[0][1].dimension)
    ordered = sorted(pairs, key=lambda pair: pair[0].namespace.key)
    for _, group in groupby(ordered, key=lambda pair: pair[0].namespace.key):
        entries = list(group)
        store.upsert(entries[0][0].namespace, entries)
    logger.info("indexed %d passages across %d namespaces", len(pairs), len(namespaces))
    return store


def open_index(
    config: PipelineConfig,
    *,
    path: str | None = None,
    retry: RetryPolicy | None = None,
) -> VectorStore:
    """The remote index when ``backends.index`` is a service, else the local one at *path*."""
    backend = config.backend("index")
    if backend is not None and not backend.is_mock:
        if backend.dimension is None:
            raise ConfigError("backends.index.dimension is required for a remote index")
        return RemoteIndex.from_config(
            backend, retry, namespaces=config.namespace_set, dimension=backend.dimension
        )
    return LocalIndex.load(path or config.index_path, config.namespace_set)
