"""Corpus ingestion and the on-disk passage store."""
from __future__ import annotations

import logging
from collections import Counter
from pathlib import Path

from ..exceptions import DataError, DuplicatePassageError, UnknownNamespaceError
from ..jsonl import read_jsonl, write_jsonl
from ..models.namespace import NamespaceLabel, NamespaceSet
from ..models.passage import Passage

logger = logging.getLogger(__name__)


def read_tags(path: str | Path) -> dict[str, tuple[str | None, str | None]]:
    """Read a tag file: ``{"id", "topic_tag", "format_tag"}`` per line."""
    tags: dict[str, tuple[str | None, str | None]] = {}
    for line_no, record in read_jsonl(path):
        doc_id = str(record.get("id", "")).strip()
        if not doc_id:
            raise DataError(f"{path}: tag record without id", line=line_no)
        if doc_id in tags:
            raise DataError(f"{path}: duplicate tag record for {doc_id!r}", line=line_no)
        tags[doc_id] = (record.get("topic_tag") or None, record.get("format_tag") or None)
    return tags


def _passages(path: str | Path, namespaces: NamespaceSet, tags: dict | None) -> list[Passage]:
    passages: list[Passage] = []
    seen: set[str] = set()
    for line_no, record in read_jsonl(path):
        doc_id = str(record.get("id", "")).strip()
        if not doc_id:
            raise DataError(f"{path}: passage without id", line=line_no)
        if doc_id in seen:
            raise DuplicatePassageError(doc_id, line=line_no)
        seen.add(doc_id)
        text = record.get("text")
        if not isinstance(text, str) or not text.strip():
            raise DataError(f"{path}: passage {doc_id!r} has no text", line=line_no)

        topic, fmt = record.get("topic_tag"), record.get("format_tag")
        if tags is not None:
            topic, fmt = tags.get(doc_id, (topic, fmt))
        # Passages without an explicit namespace live in their topic's namespace.
        name = record.get("namespace") or topic
        if not name:
            raise DataError(f"{path}: passage {doc_id!r} has neither namespace nor topic tag",
                            line=line_no)
        try:
            label = namespaces.resolve(name)
        except UnknownNamespaceError as exc:
            raise DataError(f"{path}: {exc}", line=line_no) from exc
        passages.append(Passage(id=doc_id, text=text, namespace=label,
                                topic_tag=topic or None, format_tag=fmt or None))
    return passages


def ingest_corpus(
    corpus_path: str | Path,
    namespaces: NamespaceSet,
    tag_path: str | Path | None = None,
) -> list[Passage]:
    """Parse and validate a raw corpus file, joining topic/format tags by passage id."""
    tags = read_tags(tag_path) if tag_path is not None else None
    passages = _passages(corpus_path, namespaces, tags)
    if not passages:
        raise DataError("empty corpus")
    logger.info("ingested %d passages from %s", len(passages), corpus_path)
    return passages


def namespace_counts(passages: list[Passage]) -> dict[NamespaceLabel, int]:
    counts = Counter(p.namespace for p in passages)
    return dict(sorted(counts.items(), key=lambda item: item[0].key))


def save_corpus(path: str | Path, passages: list[Passage]) -> int:
    return write_jsonl(path, (p.to_dict() for p in passages))


def load_corpus(path: str | Path, namespaces: NamespaceSet) -> dict[str, Passage]:
    """Load the passage store written by :func:`save_corpus`, keyed by id."""
    return {p.id: p for p in _passages(path, namespaces, None)}
