from .base import SearchResult, VectorStore, rank_scores
from .corpus import ingest_corpus, load_corpus, namespace_counts, read_tags, save_corpus
from .local import LocalIndex
from .remote import RemoteIndex

__all__ = [
    "SearchResult",
    "VectorStore",
    "rank_scores",
    "LocalIndex",
    "RemoteIndex",
    "ingest_corpus",
    "load_corpus",
    "namespace_counts",
    "read_tags",
    "save_corpus",
]
