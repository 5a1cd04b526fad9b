"""Deterministic offline backends, selected by the ``mock:`` endpoint scheme.

Every mock is a pure function of its inputs (the scripted chat client also
of its call order), so runs reproduce byte for byte across platforms.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..exceptions import APIError, NetworkError
from ..models.embedding import EmbeddingVector
from ..models.enums import PromptKind
from ..models.messages import ChatRequest, RerankRequest
from ..prompts import CONTEXT_MARKER, QUESTION_MARKER, ROUTE_MARKER
from ..text import tokenize
from .base import check_texts, order_rerank_scores

MOCK_DIMENSION = 64


def token_bucket(token: str, dimension: int = MOCK_DIMENSION) -> int:
    """Bucket of *token*: its 8-byte BLAKE2b digest, little-endian, mod *dimension*."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dimension


class HashingEmbedder:
    """
    Bag-of-words embedder: count each token into one of ``dimension`` hash
    buckets, then L2-normalize. Texts sharing vocabulary get higher cosine.

    A text with no alphanumeric token is hashed as a single token made of its
    stripped content.
    """

    def __init__(self, dimension: int = MOCK_DIMENSION) -> None:
        self.dimension = dimension

    def embed_one(self, text: str) -> EmbeddingVector:
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text) or [text.strip()]:
            counts[token_bucket(token, self.dimension)] += 1.0
        return EmbeddingVector.normalized(counts)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed_one(t) for t in check_texts(texts)]

    def __repr__(self) -> str:
        return f"HashingEmbedder(dimension={self.dimension})"


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x00".join(parts).encode("utf-8")).hexdigest()


def _section(text: str, start: str, end: str) -> str:
    """The text between *start* and the next *end*, or ``""`` when *start* is absent."""
    head = text.find(start)
    if head == -1:
        return ""
    head += len(start)
    tail = text.find(end, head)
    return text[head:] if tail == -1 else text[head:tail]


class MockChatClient:
    """
    Heuristic chat backend keyed on the request's :class:`PromptKind`:

    - rewrite: returns the query with whitespace collapsed;
    - route: boxes the namespaces sharing the most tokens with the question,
      or one hash-chosen namespace (varying with the seed) when none do;
    - generate: echoes the first non-empty context line;
    - judge: scores token overlap with the gold answer or passages;
    - no kind: ``mock-<digest>`` of the two prompt parts.
    """

    def complete(self, request: ChatRequest) -> str:
        system, user = request.system_prompt, request.user_content
        if request.kind is PromptKind.REWRITE:
            return " ".join(user.split())
        if request.kind is PromptKind.ROUTE:
            return self._route(user, request.seed)
        if request.kind is PromptKind.JUDGE:
            return self._judge(user)
        if request.kind is PromptKind.GENERATE:
            return self._generate(user)
        return "mock-" + _digest(system, user)[:16]

    @staticmethod
    def _generate(user: str) -> str:
        head = len(CONTEXT_MARKER) if user.startswith(CONTEXT_MARKER) else 0
        tail = user.rfind(QUESTION_MARKER)
        for line in user[head:tail if tail != -1 else None].splitlines():
            if line.strip():
                return line.strip()
        return "No relevant context was found."

    @staticmethod
    def _route(user: str, seed: int | None) -> str:
        lines = user.splitlines()
        question = lines[0][len("Q: "):] if lines and lines[0].startswith("Q: ") else ""
        markers = [i for i, line in enumerate(lines) if line == ROUTE_MARKER]
        start = markers[-1] + 1 if markers else len(lines)
        labels = [line[2:].strip() for line in lines[start:] if line.startswith("- ")]
        if not labels:
            return "boxed{}"
        q_tokens = set(tokenize(question))
        overlaps = [len(q_tokens & set(tokenize(label))) for label in labels]
        best = max(overlaps)
        if best > 0:
            chosen = [label for label, n in zip(labels, overlaps) if n == best]
        else:
            pick = int(_digest(question, str(seed or 0))[:8], 16) % len(labels)
            chosen = [labels[pick]]
        return f"Step1: topic identified.\nStep3: boxed{{{', '.join(chosen)}}}"

    @staticmethod
    def _judge(user: str) -> str:
        answer = set(tokenize(_section(user, "Answer to grade:\n", "\n\nExplain")))
        if "Gold answer:\n" in user:
            # correctness: share of gold-answer tokens the answer covers, on [-1, 2]
            reference = set(tokenize(_section(user, "Gold answer:\n", "\n\nAnswer to grade:")))
            share = len(answer & reference) / len(reference) if reference else 0.0
            value = -1.0 + 3.0 * share
        else:
            # faithfulness: share of answer tokens found in the passages, on [-1, 1]
            reference = set(tokenize(_section(user, "Retrieved passages:\n", "\n\nQuestion:\n")))
            share = len(answer & reference) / len(answer) if answer else 0.0
            value = -1.0 + 2.0 * share
        return f"Token overlap {share:.3f}.\nSCORE: {value:.3f}"

    def __repr__(self) -> str:
        return "MockChatClient()"


@dataclass(frozen=True)
class ScriptRule:
    contains: str
    reply: str


class ScriptedChatClient:
    """
    Replies from a script.

    Resolution order: the first rule whose ``contains`` text occurs in the user
    content; then ``replies`` (a request with a ``seed`` gets ``replies[seed]``,
    other requests consume replies in call order, cycling); then ``default``.
    """

    def __init__(
        self,
        replies: Sequence[str] = (),
        rules: Sequence[ScriptRule] = (),
        default: str | None = None,
    ) -> None:
        self.replies = list(replies)
        self.rules = list(rules)
        self.default = default
        self._calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatClient":
        """Load ``{"replies": [...], "rules": [{"contains", "reply"}], "default": ...}``."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if isinstance(data, list):
            data = {"replies": data}
        return cls(
            replies=[str(r) for r in data.get("replies", [])],
            rules=[ScriptRule(r["contains"], r["reply"]) for r in data.get("rules", [])],
            default=data.get("default"),
        )

    def complete(self, request: ChatRequest) -> str:
        for rule in self.rules:
            if rule.contains in request.user_content:
                return rule.reply
        if self.replies:
            if request.seed is not None:
                return self.replies[request.seed % len(self.replies)]
            with self._lock:
                index = self._calls
                self._calls += 1
            return self.replies[index % len(self.replies)]
        if self.default is not None:
            return self.default
        raise APIError("chat script has no reply for this request")

    def __repr__(self) -> str:
        return f"ScriptedChatClient(replies={len(self.replies)}, rules={len(self.rules)})"


class OverlapReranker:
    """Scores each document by the share of distinct query tokens it contains."""

    @staticmethod
    def score(query: str, document: str) -> float:
        q_tokens = set(tokenize(query))
        if not q_tokens:
            return 0.0
        return len(q_tokens & set(tokenize(document))) / len(q_tokens)

    def rerank(self, request: RerankRequest) -> list[tuple[int, float]]:
        scores = [(i, self.score(request.query, doc)) for i, doc in enumerate(request.documents)]
        return order_rerank_scores(scores, request.top_n)

    def __repr__(self) -> str:
        return "OverlapReranker()"


class UnavailableBackend:
    """A backend that is always down (``mock:down``); every call raises ``NetworkError``."""

    dimension: int | None = None

    def _fail(self) -> NetworkError:
        return NetworkError("mock backend is unavailable")

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        raise self._fail()

    def complete(self, request: ChatRequest) -> str:
        raise self._fail()

    def rerank(self, request: RerankRequest) -> list[tuple[int, float]]:
        raise self._fail()

    def __repr__(self) -> str:
        return "UnavailableBackend()"
