"""Clients for the embedder, chat, reranker and judge services, plus offline mocks."""
from .base import ChatClient, Embedder, HttpBackend, Reranker, RetryPolicy
from .factory import build_chat, build_embedder, build_reranker, retry_policy
from .mock import (
    HashingEmbedder,
    MockChatClient,
    OverlapReranker,
    ScriptedChatClient,
    ScriptRule,
    UnavailableBackend,
)
from .remote import RemoteChatClient, RemoteEmbedder, RemoteReranker

__all__ = [
    "ChatClient", "Embedder", "Reranker", "HttpBackend", "RetryPolicy",
    "build_chat", "build_embedder", "build_reranker", "retry_policy",
    "HashingEmbedder", "MockChatClient", "OverlapReranker", "ScriptedChatClient",
    "ScriptRule", "UnavailableBackend",
    "RemoteChatClient", "RemoteEmbedder", "RemoteReranker",
]
