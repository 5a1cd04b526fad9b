"""Exact, namespaced, in-memory dense index with a compact on-disk format.

On disk an index is a directory holding ``manifest.json`` (dimension,
namespaces, counts, shard file names) and one record file per namespace.
Each record is::

    <u32 id length> <id, UTF-8> <dimension x float32> <u32 payload length> <payload, UTF-8 JSON>

all little-endian. Records are read in order and a later record for the same
id replaces an earlier one, so shard files may be appended to.
"""
from __future__ import annotations

import json
import logging
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from ..exceptions import DataError, DimensionMismatchError
from ..models.candidate import RetrievalCandidate
from ..models.embedding import EmbeddingVector
from ..models.namespace import NamespaceLabel, NamespaceSet
from ..models.passage import Passage
from .base import SearchResult, rank_scores

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class _Shard:
    """Immutable snapshot of one namespace; replaced wholesale on upsert."""
    ids: tuple[str, ...]
    passages: tuple[Passage, ...]
    matrix: np.ndarray

    @classmethod
    def empty(cls, dimension: int) -> "_Shard":
        return cls((), (), np.zeros((0, dimension), dtype=np.float64))


def _stored(vector: EmbeddingVector) -> np.ndarray:
    # float32 precision, matching the on-disk records.
    return vector.values.astype(np.float32).astype(np.float64)


class LocalIndex:
    """
    Full-scan cosine index partitioned by namespace.

    Searches read immutable shard snapshots and never lock; ``upsert`` builds a
    new snapshot under the namespace's writer lock and swaps it in, so a search
    sees either the old or the new state of each entry.

    Parameters
    ----------
    namespaces : NamespaceSet
        The configured namespaces; anything else is rejected.
    dimension : int
        Vector dimension shared by every entry.
    """

    def __init__(self, namespaces: NamespaceSet, dimension: int) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.namespaces = namespaces
        self.dimension = dimension
        self._shards: dict[str, _Shard] = {
            label.key: _Shard.empty(dimension) for label in namespaces
        }
        self._locks: dict[str, threading.Lock] = {
            label.key: threading.Lock() for label in namespaces
        }

    # ------------------------------------------------------------------
    # Writes
    # ------------------------------------------------------------------

    def upsert(
        self,
        namespace: NamespaceLabel | str,
        entries: Iterable[tuple[Passage, EmbeddingVector]],
    ) -> int:
        """Insert or replace entries; returns the number of distinct ids written."""
        label = self.namespaces.resolve(namespace)
        entries = list(entries)
        for passage, vector in entries:
            if vector.dimension != self.dimension:
                raise DimensionMismatchError(self.dimension, vector.dimension)
            if passage.namespace != label:
                raise DataError(
                    f"passage {passage.id!r} belongs to {passage.namespace.name!r}, "
                    f"not {label.name!r}"
                )
        if not entries:
            return 0

        with self._locks[label.key]:
            shard = self._shards[label.key]
            position = {pid: i for i, pid in enumerate(shard.ids)}
            ids = list(shard.ids)
            passages = list(shard.passages)
            rows = list(shard.matrix)
            touched: set[str] = set()
            for passage, vector in entries:
                touched.add(passage.id)
                if passage.id in position:
                    i = position[passage.id]
                    passages[i] = passage
                    rows[i] = _stored(vector)
                else:
                    position[passage.id] = len(ids)
                    ids.append(passage.id)
                    passages.append(passage)
                    rows.append(_stored(vector))
            matrix = np.vstack(rows) if rows else np.zeros((0, self.dimension))
            matrix.setflags(write=False)
            self._shards[label.key] = _Shard(tuple(ids), tuple(passages), matrix)
        logger.debug("upserted %d entries into %s", len(touched), label.name)
        return len(touched)

    # ------------------------------------------------------------------
    # Reads
    # ------------------------------------------------------------------

    def search(
        self,
        namespaces: Sequence[NamespaceLabel | str],
        query: EmbeddingVector,
        k: int,
    ) -> SearchResult:
        """Exact top-*k* by cosine similarity over the union of *namespaces*."""
        if k < 1:
            raise ValueError("k must be positive")
        if query.dimension != self.dimension:
            raise DimensionMismatchError(self.dimension, query.dimension)
        labels = list(dict.fromkeys(self.namespaces.resolve(n) for n in namespaces))
        shards = [self._shards[label.key] for label in labels]

        ids: list[str] = []
        passages: list[Passage] = []
        for shard in shards:
            ids.extend(shard.ids)
            passages.extend(shard.passages)
        if not ids:
            return SearchResult(candidates=(), scanned=0)

        matrix = np.vstack([s.matrix for s in shards if len(s.ids)])
        scores = np.clip(matrix @ query.values, -1.0, 1.0)
        order = rank_scores(scores, ids, k)
        candidates = tuple(
            RetrievalCandidate(passage=passages[i], dense_score=float(scores[i]), rank=r)
            for r, i in enumerate(order, start=1)
        )
        return SearchResult(candidates=candidates, scanned=len(ids))

    def total_count(self) -> dict[NamespaceLabel, int]:
        return {label: len(self._shards[label.key].ids) for label in self.namespaces}

    def scanned_fraction(self, searched: Sequence[NamespaceLabel | str]) -> float:
        """Share of all stored vectors that live in the *searched* namespaces."""
        counts = self.total_count()
        total = sum(counts.values())
        if total == 0:
            raise ValueError("index is empty")
        labels = {self.namespaces.resolve(n) for n in searched}
        return sum(counts[label] for label in labels) / total

    def passage(self, passage_id: str) -> Passage | None:
        for shard in self._shards.values():
            if passage_id in shard.ids:
                return shard.passages[shard.ids.index(passage_id)]
        return None

    def __len__(self) -> int:
        return sum(len(s.ids) for s in self._shards.values())

    def __repr__(self) -> str:
        return f"LocalIndex(dimension={self.dimension}, vectors={len(self)})"

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the manifest and one compact record file per namespace."""
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        files: dict[str, str] = {}
        counts: dict[str, int] = {}
        for n, label in enumerate(self.namespaces):
            shard = self._shards[label.key]
            name = f"shard-{n:03d}.rec"
            files[label.name] = name
            counts[label.name] = len(shard.ids)
            tmp = root / f".{name}.tmp"
            with open(tmp, "wb") as fh:
                for passage, row in zip(shard.passages, shard.matrix):
                    _write_record(fh, passage, row)
            os.replace(tmp, root / name)
        manifest = {
            "format": FORMAT_VERSION,
            "dimension": self.dimension,
            "namespaces": [label.name for label in self.namespaces],
            "counts": counts,
            "files": files,
        }
        tmp = root / f".{MANIFEST}.tmp"
        tmp.write_text(json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, root / MANIFEST)
        logger.info("saved index with %d vectors to %s", len(self), root)

    @classmethod
    def load(cls, path: str | Path, namespaces: NamespaceSet | None = None) -> "LocalIndex":
        """Load an index saved by :meth:`save`.

        With *namespaces* given, every stored namespace must belong to that set.
        """
        root = Path(path)
        try:
            manifest = json.loads((root / MANIFEST).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read index manifest in {root}: {exc}") from exc
        if manifest.get("format") != FORMAT_VERSION:
            raise DataError(f"unsupported index format {manifest.get('format')!r}")
        stored = NamespaceSet(manifest["namespaces"])
        namespaces = namespaces or stored
        index = cls(namespaces, int(manifest["dimension"]))
        for label in stored:
            target = namespaces.resolve(label)
            shard_file = root / manifest["files"][label.name]
            with open(shard_file, "rb") as fh:
                entries = list(_read_records(fh, index.dimension, target))
            index.upsert(target, entries)
            expected = manifest["counts"].get(label.name)
            if expected is not None and len(index._shards[target.key].ids) != expected:
                raise DataError(f"{shard_file}: expected {expected} entries per manifest")
        return index


def _write_record(fh: BinaryIO, passage: Passage, row: np.ndarray) -> None:
    id_bytes = passage.id.encode("utf-8")
    payload = json.dumps(
        {"text": passage.text, "topic_tag": passage.topic_tag, "format_tag": passage.format_tag},
        ensure_ascii=False,
        sort_keys=True,
    ).encode("utf-8")
    fh.write(_U32.pack(len(id_bytes)))
    fh.write(id_bytes)
    fh.write(row.astype("<f4").tobytes())
    fh.write(_U32.pack(len(payload)))
    fh.write(payload)


def _read_exact(fh: BinaryIO, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise DataError(f"truncated index record in {getattr(fh, 'name', '<stream>')}")
    return data


def _read_records(fh: BinaryIO, dimension: int, namespace: NamespaceLabel):
    while True:
        head = fh.read(_U32.size)
        if not head:
            return
        if len(head) != _U32.size:
            raise DataError(f"truncated index record in {getattr(fh, 'name', '<stream>')}")
        passage_id = _read_exact(fh, _U32.unpack(head)[0]).decode("utf-8")
        values = np.frombuffer(_read_exact(fh, 4 * dimension), dtype="<f4")
        (size,) = _U32.unpack(_read_exact(fh, _U32.size))
        meta = json.loads(_read_exact(fh, size).decode("utf-8"))
        passage = Passage(
            id=passage_id,
            text=meta.get("text", ""),
            namespace=namespace,
            topic_tag=meta.get("topic_tag"),
            format_tag=meta.get("format_tag"),
        )
        # Already unit length at float32 precision; not renormalized.
        row = values.astype(np.float64)
        row.setflags(write=False)
        yield passage, EmbeddingVector(values=row)
