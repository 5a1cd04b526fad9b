"""Tests for the local and remote vector indexes and the corpus store."""
import json
import threading

import numpy as np
import pytest

from cascade_rag.clients import RetryPolicy
from cascade_rag.exceptions import (
    APIError,
    DataError,
    DimensionMismatchError,
    DuplicatePassageError,
    UnknownNamespaceError,
)
from cascade_rag.models import EmbeddingVector, NamespaceLabel, NamespaceSet, Passage
from cascade_rag.store import (
    LocalIndex,
    RemoteIndex,
    ingest_corpus,
    load_corpus,
    namespace_counts,
    rank_scores,
    save_corpus,
)
from conftest import TOPICS, FakeResponse, FakeSession

LABELS = NamespaceSet(["A", "B", "C"])


def _entry(pid, values, namespace="A"):
    label = LABELS.resolve(namespace)
    passage = Passage(id=pid, text=f"text of {pid}", namespace=label)
    return passage, EmbeddingVector.normalized(values)


def _random_index(rng, dimension=64, max_vectors=1000):
    """Up to *max_vectors* random vectors spread over the three namespaces."""
    index = LocalIndex(LABELS, dimension)
    stored = {}
    owners = rng.integers(0, len(LABELS), size=int(rng.integers(1, max_vectors + 1)))
    for position, label in enumerate(LABELS):
        n = int(np.count_nonzero(owners == position))
        entries = [
            _entry(f"{label.name}-{i:04d}", rng.normal(size=dimension), label.name)
            for i in range(n)
        ]
        index.upsert(label, entries)
        for passage, vector in entries:
            stored[passage.id] = (label, vector.values.astype(np.float32).astype(np.float64))
    return index, stored


def _oracle(stored, namespaces, query, k):
    wanted = {LABELS.resolve(n) for n in namespaces}
    scored = [
        (-float(np.dot(values, query.values)), pid)
        for pid, (label, values) in stored.items() if label in wanted
    ]
    return [pid for _, pid in sorted(scored)[:k]]


class TestRankScores:
    def test_ties_broken_by_id(self):
        scores = np.array([0.5, 0.9, 0.5, 0.5])
        assert rank_scores(scores, ["d", "a", "c", "b"], 3) == [1, 3, 2]

    def test_k_larger_than_pool(self):
        assert rank_scores(np.array([0.1, 0.2]), ["x", "y"], 10) == [1, 0]


class TestLocalIndexUpsert:
    def test_counts_and_replace(self):
        index = LocalIndex(LABELS, 2)
        assert index.upsert("A", [_entry("p1", [1, 0]), _entry("p2", [0, 1])]) == 2
        assert index.upsert("a", [_entry("p1", [1, 1])]) == 1
        assert len(index) == 2
        assert index.total_count()[NamespaceLabel("A")] == 2
        result = index.search(["A"], EmbeddingVector.normalized([1, 1]), 1)
        assert result.candidates[0].id == "p1"
        assert result.candidates[0].dense_score == pytest.approx(1.0, abs=1e-6)

    def test_duplicate_id_in_one_batch_keeps_last(self):
        index = LocalIndex(LABELS, 2)
        assert index.upsert("A", [_entry("p1", [1, 0]), _entry("p1", [0, 1])]) == 1
        hit = index.search(["A"], EmbeddingVector.normalized([0, 1]), 1).candidates[0]
        assert hit.dense_score == pytest.approx(1.0, abs=1e-6)

    def test_dimension_mismatch(self):
        index = LocalIndex(LABELS, 3)
        with pytest.raises(DimensionMismatchError):
            index.upsert("A", [_entry("p1", [1, 0])])
        with pytest.raises(DimensionMismatchError):
            index.search(["A"], EmbeddingVector.normalized([1, 0]), 1)

    def test_unknown_namespace(self):
        index = LocalIndex(LABELS, 2)
        with pytest.raises(UnknownNamespaceError):
            index.upsert("Z", [])

    def test_passage_must_belong_to_namespace(self):
        index = LocalIndex(LABELS, 2)
        with pytest.raises(DataError):
            index.upsert("B", [_entry("p1", [1, 0], "A")])

    def test_concurrent_upserts(self):
        index = LocalIndex(LABELS, 4)

        def writer(label):
            rng = np.random.default_rng(ord(label))
            for i in range(20):
                index.upsert(label, [_entry(f"{label}-{i}", rng.normal(size=4) + 0.1, label)])

        threads = [threading.Thread(target=writer, args=(name,)) for name in ("A", "B", "C")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(index) == 60


class TestLocalIndexSearch:
    def test_self_similarity(self, index, passages, embedder):
        for passage in passages[::37]:
            (vector,) = embedder.embed([passage.text])
            top = index.search([passage.namespace], vector, 1).candidates[0]
            assert top.id == passage.id
            assert top.dense_score == pytest.approx(1.0, abs=1e-5)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            index, stored = _random_index(rng)
            query = EmbeddingVector.normalized(rng.normal(size=64))
            namespaces = [n for n in ("A", "B", "C") if rng.random() < 0.6] or ["A"]
            for k in (1, 10, 100):
                result = index.search(namespaces, query, k)
                ids = [c.id for c in result.candidates]
                assert ids == _oracle(stored, namespaces, query, k)
                assert [c.rank for c in result.candidates] == list(range(1, len(ids) + 1))
                scores = [c.dense_score for c in result.candidates]
                assert scores == sorted(scores, reverse=True)

    def test_identical_vectors_ordered_by_id(self):
        index = LocalIndex(LABELS, 2)
        index.upsert("A", [_entry(pid, [1, 1]) for pid in ("c", "a", "b")])
        result = index.search(["A"], EmbeddingVector.normalized([1, 1]), 3)
        assert [c.id for c in result.candidates] == ["a", "b", "c"]

    def test_only_searched_namespaces(self):
        index = LocalIndex(LABELS, 2)
        index.upsert("A", [_entry("a1", [1, 0])])
        index.upsert("B", [_entry("b1", [1, 0], "B")])
        result = index.search(["B", "b"], EmbeddingVector.normalized([1, 0]), 10)
        assert [c.id for c in result.candidates] == ["b1"]
        assert result.scanned == 1

    def test_empty_namespaces_and_bad_k(self):
        index = LocalIndex(LABELS, 2)
        assert index.search(["C"], EmbeddingVector.normalized([1, 0]), 5).candidates == ()
        with pytest.raises(ValueError):
            index.search(["C"], EmbeddingVector.normalized([1, 0]), 0)

    def test_scanned_fraction(self, index):
        assert index.scanned_fraction(["Games", "Travel"]) == pytest.approx(2 / len(TOPICS))
        with pytest.raises(ValueError):
            LocalIndex(LABELS, 2).scanned_fraction(["A"])

    def test_passage_lookup(self, index):
        assert index.passage("t03-p001").namespace.name == TOPICS[3]
        assert index.passage("missing") is None


class TestLocalIndexPersistence:
    def test_round_trip(self, tmp_path, index, embedder):
        index.save(tmp_path / "idx")
        loaded = LocalIndex.load(tmp_path / "idx", index.namespaces)
        assert loaded.total_count() == index.total_count()
        (query,) = embedder.embed(["games history travel"])
        labels = list(index.namespaces)[:6]
        before = index.search(labels, query, 25).candidates
        after = loaded.search(labels, query, 25).candidates
        assert [c.id for c in after] == [c.id for c in before]
        assert [c.dense_score for c in after] == [c.dense_score for c in before]
        assert loaded.passage("t05-p002") == index.passage("t05-p002")

    def test_manifest(self, tmp_path):
        index = LocalIndex(LABELS, 2)
        index.upsert("B", [_entry("b1", [1, 0], "B")])
        index.save(tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["dimension"] == 2
        assert manifest["counts"] == {"A": 0, "B": 1, "C": 0}

    def test_appended_record_replaces_earlier(self, tmp_path):
        index = LocalIndex(LABELS, 2)
        index.upsert("A", [_entry("p1", [1, 0])])
        index.save(tmp_path)
        newer = LocalIndex(LABELS, 2)
        newer.upsert("A", [_entry("p1", [0, 1])])
        newer.save(tmp_path / "newer")
        shard = (tmp_path / "shard-000.rec")
        shard.write_bytes(shard.read_bytes() + (tmp_path / "newer" / "shard-000.rec").read_bytes())
        loaded = LocalIndex.load(tmp_path)
        hit = loaded.search(["A"], EmbeddingVector.normalized([0, 1]), 1).candidates[0]
        assert hit.dense_score == pytest.approx(1.0, abs=1e-6)

    def test_truncated_shard(self, tmp_path):
        index = LocalIndex(LABELS, 2)
        index.upsert("A", [_entry("p1", [1, 0])])
        index.save(tmp_path)
        shard = tmp_path / "shard-000.rec"
        shard.write_bytes(shard.read_bytes()[:-3])
        with pytest.raises(DataError):
            LocalIndex.load(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            LocalIndex.load(tmp_path)


class TestRemoteIndex:
    def _index(self, handler):
        session = FakeSession(handler=handler)
        retry = RetryPolicy(attempts=1, sleep=lambda _: None)
        return RemoteIndex("https://idx.example/", namespaces=LABELS, dimension=2,
                           session=session, retry=retry), session

    def test_upsert_batches(self):
        index, session = self._index(
            lambda url, payload: FakeResponse(payload={"upsertedCount": 1})
        )
        entries = [_entry(f"p{i:03d}", [1, i + 1]) for i in range(250)]
        assert index.upsert("a", entries) == 250
        assert [len(p["vectors"]) for _, p in session.calls] == [100, 100, 50]
        url, payload = session.calls[0]
        assert url == "https://idx.example/vectors/upsert"
        assert payload["namespace"] == "A"
        assert payload["vectors"][0]["metadata"]["text"] == "text of p000"

    def test_search_merges_namespaces(self):
        matches = {
            "A": [{"id": "a1", "score": 0.5, "metadata": {"text": "x"}},
                  {"id": "a2", "score": 0.9, "metadata": {"text": "y"}}],
            "B": [{"id": "b1", "score": 0.7, "metadata": {"text": "z"}}],
        }

        def handler(url, payload):
            if url.endswith("/query"):
                return FakeResponse(payload={"matches": matches[payload["namespace"]]})
            return FakeResponse(payload={"namespaces": {"A": {"vectorCount": 2},
                                                        "B": {"vectorCount": 1},
                                                        "C": {"vectorCount": 7}}})

        index, session = self._index(handler)
        result = index.search(["A", "B"], EmbeddingVector.normalized([1, 0]), 2)
        assert [c.id for c in result.candidates] == ["a2", "b1"]
        assert result.candidates[0].passage.namespace == NamespaceLabel("A")
        assert result.scanned == 3
        assert index.scanned_fraction(["C"]) == pytest.approx(0.7)
        queries = [p for url, p in session.calls if url.endswith("/query")]
        assert {q["topK"] for q in queries} == {2}

    def test_malformed_matches(self):
        index, _ = self._index(
            lambda url, payload: FakeResponse(payload={"matches": [{"id": "x"}]})
        )
        with pytest.raises(APIError, match="Malformed"):
            index.search(["A"], EmbeddingVector.normalized([1, 0]), 1)


class TestCorpus:
    def _write(self, path, records):
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
        return path

    def test_namespace_from_topic_tag(self, tmp_path):
        corpus = self._write(tmp_path / "c.jsonl", [
            {"id": "1", "text": "alpha", "topic_tag": "games", "format_tag": "News"},
            {"id": "2", "text": "beta", "namespace": "Travel"},
        ])
        passages = ingest_corpus(corpus, NamespaceSet(TOPICS))
        assert [p.namespace.name for p in passages] == ["Games", "Travel"]
        counts = namespace_counts(passages)
        assert counts[NamespaceLabel("Games")] == 1

    def test_tag_file_join(self, tmp_path):
        corpus = self._write(tmp_path / "c.jsonl", [{"id": "1", "text": "alpha"}])
        tags = self._write(tmp_path / "t.jsonl", [
            {"id": "1", "topic_tag": "History", "format_tag": "Article"}])
        (passage,) = ingest_corpus(corpus, NamespaceSet(TOPICS), tags)
        assert passage.namespace.name == "History"
        assert passage.format_tag == "Article"

    def test_rejects(self, tmp_path):
        ns = NamespaceSet(TOPICS)
        dup = self._write(tmp_path / "d.jsonl", [{"id": "1", "text": "a", "namespace": "Games"},
                                                 {"id": "1", "text": "b", "namespace": "Games"}])
        with pytest.raises(DuplicatePassageError) as exc:
            ingest_corpus(dup, ns)
        assert exc.value.line == 2
        unknown = self._write(tmp_path / "u.jsonl", [{"id": "1", "text": "a", "namespace": "Mars"}])
        with pytest.raises(DataError):
            ingest_corpus(unknown, ns)
        blank = self._write(tmp_path / "b.jsonl", [{"id": "1", "text": " ", "namespace": "Games"}])
        with pytest.raises(DataError):
            ingest_corpus(blank, ns)
        empty = tmp_path / "e.jsonl"
        empty.write_text("\n")
        with pytest.raises(DataError, match="empty corpus"):
            ingest_corpus(empty, ns)

    def test_save_and_load(self, tmp_path, passages, namespaces):
        assert save_corpus(tmp_path / "store.jsonl", passages) == len(passages)
        loaded = load_corpus(tmp_path / "store.jsonl", namespaces)
        assert loaded["t10-p004"] == next(p for p in passages if p.id == "t10-p004")
