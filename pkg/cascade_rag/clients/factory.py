"""Build backend clients from :class:`BackendConfig` entries.

Endpoint forms understood for mocks::

    mock:               default mock for the role
    mock:echo           heuristic chat mock (same as ``mock:`` for chat)
    mock:down           always unavailable
    mock:dim=32         hashing embedder with 32 buckets
    mock:script=PATH    scripted chat replies (JSON file)
"""
from __future__ import annotations

import logging

from ..config import BackendConfig, PipelineConfig
from ..exceptions import ConfigError
from .base import ChatClient, Embedder, Reranker, RetryPolicy
from .mock import (
    MOCK_DIMENSION,
    HashingEmbedder,
    MockChatClient,
    OverlapReranker,
    ScriptedChatClient,
    UnavailableBackend,
)
from .remote import RemoteChatClient, RemoteEmbedder, RemoteReranker

logger = logging.getLogger(__name__)


def _mock_option(backend: BackendConfig) -> tuple[str, str]:
    key, _, value = backend.mock_options.partition("=")
    return key.strip(), value.strip()


def retry_policy(config: PipelineConfig) -> RetryPolicy:
    return RetryPolicy(attempts=config.retry_attempts, backoff=config.retry_backoff)


def build_embedder(backend: BackendConfig, retry: RetryPolicy | None = None) -> Embedder:
    if backend.is_mock:
        key, value = _mock_option(backend)
        if key == "down":
            return UnavailableBackend()
        if key == "dim":
            return HashingEmbedder(int(value))
        if key:
            raise ConfigError(f"unknown mock embedder option {backend.endpoint!r}")
        return HashingEmbedder(backend.dimension or MOCK_DIMENSION)
    return RemoteEmbedder.from_config(backend, retry, dimension=backend.dimension)


def build_chat(backend: BackendConfig, retry: RetryPolicy | None = None) -> ChatClient:
    if backend.is_mock:
        key, value = _mock_option(backend)
        if key == "down":
            return UnavailableBackend()
        if key == "script":
            try:
                return ScriptedChatClient.from_file(value)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot load chat script {value!r}: {exc}") from exc
        if key not in ("", "echo"):
            raise ConfigError(f"unknown mock chat option {backend.endpoint!r}")
        return MockChatClient()
    return RemoteChatClient.from_config(backend, retry)


def build_reranker(backend: BackendConfig, retry: RetryPolicy | None = None) -> Reranker:
    if backend.is_mock:
        key, _ = _mock_option(backend)
        if key == "down":
            return UnavailableBackend()
        if key:
            raise ConfigError(f"unknown mock reranker option {backend.endpoint!r}")
        return OverlapReranker()
    return RemoteReranker.from_config(backend, retry)
