"""Pytest configuration shared across the test suite.

Loads variables from a local ``.env`` file (e.g. ``CASCADE_RAG_LIVE_KEY``) so the
live integration tests can pick up credentials without exporting them manually.
This is a no-op if ``python-dotenv`` isn't installed or no ``.env`` file exists.

Also provides the synthetic corpora used across the suite: 24 topic
namespaces with a fixed number of passages each, generated from a seeded
vocabulary so every run sees the same text.
"""
import json
import random
from pathlib import Path

import pytest

from cascade_rag.clients.mock import HashingEmbedder, MockChatClient, OverlapReranker
from cascade_rag.config import PipelineConfig
from cascade_rag.indexing import build_index
from cascade_rag.models.namespace import NamespaceSet
from cascade_rag.models.passage import Passage
from cascade_rag.pipeline import Pipeline

try:
    from dotenv import load_dotenv
except ImportError:  # python-dotenv is an optional dev convenience
    load_dotenv = None

if load_dotenv is not None:
    # Look for a .env at the repo root (one level above tests/).
    env_path = Path(__file__).resolve().parent.parent / ".env"
    load_dotenv(env_path)

TOPICS = [
    "Adult", "Art & Design", "Software Development", "Crime & Law", "Education & Jobs",
    "Hardware", "Entertainment", "Social Life", "Fashion & Beauty", "Finance & Business",
    "Food & Dining", "Games", "Health", "History", "Home & Hobbies", "Industrial",
    "Literature", "Politics", "Religion", "Science & Tech.", "Software", "Sports & Fitness",
    "Transportation", "Travel",
]

FORMATS = ["Article", "Tutorial", "News", "Q&A Forum"]

_SYLLABLES = ["ka", "lo", "mi", "ren", "to", "sa", "vi", "nor", "del", "qu", "pe", "zan"]


def vocabulary(size: int = 300, seed: int = 7) -> list[str]:
    rng = random.Random(seed)
    words: set[str] = set()
    while len(words) < size:
        words.add("".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3))))
    return sorted(words)


def make_passages(per_namespace: int = 10, seed: int = 11) -> list[Passage]:
    """``per_namespace`` passages for each topic, ids ``tNN-pMMM``."""
    rng = random.Random(seed)
    words = vocabulary()
    namespaces = NamespaceSet(TOPICS)
    passages = []
    for t, label in enumerate(namespaces):
        topic_words = label.name.lower().replace("&", " ").replace(".", " ").split()
        for p in range(per_namespace):
            body = [rng.choice(words) for _ in range(rng.randint(30, 60))]
            body[rng.randrange(len(body))] = " ".join(topic_words)
            passages.append(
                Passage(
                    id=f"t{t:02d}-p{p:03d}",
                    text=" ".join(body),
                    namespace=label,
                    topic_tag=label.name,
                    format_tag=FORMATS[p % len(FORMATS)],
                )
            )
    return passages


GOLDEN_TOPICS = ["Travel", "Food & Dining", "Games", "History"]

GOLDEN_QUESTION = "travel  tips for   food abroad"

GOLDEN_TEXTS = [
    ("g-tr1", "Travel", "cheap rail pass tips for travel abroad on a budget"),
    ("g-tr2", "Travel", "city museum ticket guide for local travel"),
    ("g-tr3", "Travel", "hostel map and train tips"),
    ("g-fd1", "Food & Dining", "street food market guide with spicy noodles"),
    ("g-fd2", "Food & Dining", "local wine and cheese tips for food lovers abroad"),
    ("g-fd3", "Food & Dining", "bread recipe for a simple soup"),
    ("g-ga1", "Games", "chess board strategy for beginners"),
    ("g-ga2", "Games", "dice games for travel nights"),
    ("g-ga3", "Games", "board games with cheap tips"),
    ("g-hi1", "History", "ancient roman empire and its war history"),
    ("g-hi2", "History", "history tour tips for travel abroad"),
    ("g-hi3", "History", "food history of the roman empire"),
]


def golden_passages() -> list[Passage]:
    """Twelve short passages whose hashed cosines and BM25 scores are checked by hand."""
    namespaces = NamespaceSet(GOLDEN_TOPICS)
    return [
        Passage(id=pid, text=text, namespace=namespaces.resolve(topic), topic_tag=topic,
                format_tag="Article")
        for pid, topic, text in GOLDEN_TEXTS
    ]


def golden_config(**changes) -> PipelineConfig:
    return PipelineConfig(namespaces=tuple(GOLDEN_TOPICS), dense_k=4, prune_k=3, rerank_k=2,
                          token_budget=12, route_top_n=2, vote_count=4, **changes)


@pytest.fixture(scope="session")
def namespaces():
    return NamespaceSet(TOPICS)


@pytest.fixture(scope="session")
def passages():
    return make_passages()


@pytest.fixture
def config():
    return PipelineConfig(namespaces=tuple(TOPICS))


@pytest.fixture(scope="session")
def embedder():
    return HashingEmbedder(64)


@pytest.fixture(scope="session")
def index(passages, namespaces, embedder):
    return build_index(passages, embedder, namespaces)


@pytest.fixture
def pipeline(config, index, embedder):
    return Pipeline(
        config=config,
        chat=MockChatClient(),
        embedder=embedder,
        reranker=OverlapReranker(),
        store=index,
    )


@pytest.fixture(scope="session")
def golden_pipeline():
    """Primary 64-bucket index plus a 16-bucket Baseline index over the golden passages."""
    passages = golden_passages()
    namespaces = NamespaceSet(GOLDEN_TOPICS)
    return Pipeline(
        config=golden_config(),
        chat=MockChatClient(),
        embedder=HashingEmbedder(64),
        reranker=OverlapReranker(),
        store=build_index(passages, HashingEmbedder(64), namespaces),
        baseline_embedder=HashingEmbedder(16),
        baseline_store=build_index(passages, HashingEmbedder(16), namespaces),
    )


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=None):
        self.status_code = status_code
        self._payload = payload
        self.text = text if text is not None else json.dumps(payload)

    @property
    def ok(self):
        return self.status_code < 400

    def json(self):
        if self._payload is None:
            raise ValueError("no JSON")
        return self._payload


class FakeSession:
    """Stands in for ``requests.Session``.

    Replays queued responses (raising queued exceptions), or answers every POST
    through ``handler(url, payload)`` when one is given. Records each call.
    """

    def __init__(self, *responses, handler=None):
        self.responses = list(responses)
        self.handler = handler
        self.headers = {}
        self.calls = []
        self.closed = False

    def post(self, url, json=None, timeout=None):
        self.calls.append((url, json))
        item = self.handler(url, json) if self.handler else self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    def close(self):
        self.closed = True


@pytest.fixture(scope="session")
def large_index(namespaces, embedder):
    """60 passages per namespace: enough for a full 100/20/10 cascade over two namespaces."""
    return build_index(make_passages(per_namespace=60, seed=23), embedder, namespaces)
