"""Backend contracts, retry policy and the shared HTTP transport."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence, TypeVar, runtime_checkable

import requests
from requests import Response, Session

from ..config import BackendConfig
from ..exceptions import APIError, BackendError, ContextOverflowError, NetworkError
from ..models.embedding import EmbeddingVector
from ..models.messages import ChatRequest, RerankRequest

logger = logging.getLogger(__name__)

T = TypeVar("T")

_OVERFLOW_MARKERS = ("context_length", "context length", "maximum context", "too many tokens")


@runtime_checkable
class Embedder(Protocol):
    dimension: int | None

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        ...


@runtime_checkable
class ChatClient(Protocol):
    def complete(self, request: ChatRequest) -> str:
        ...


@runtime_checkable
class Reranker(Protocol):
    def rerank(self, request: RerankRequest) -> list[tuple[int, float]]:
        ...


def check_texts(texts: Sequence[str]) -> list[str]:
    """Validate embedding inputs: a non-empty list of non-blank strings."""
    texts = list(texts)
    if not texts:
        raise ValueError("embed needs at least one text")
    for i, text in enumerate(texts):
        if not text or not text.strip():
            raise ValueError(f"text {i} is empty")
    return texts


def order_rerank_scores(scores: Sequence[tuple[int, float]], top_n: int) -> list[tuple[int, float]]:
    """Sort by descending score, lower index first on ties, and keep *top_n*."""
    ordered = sorted(((int(i), float(s)) for i, s in scores), key=lambda p: (-p[1], p[0]))
    return ordered[:top_n]


@dataclass(frozen=True)
class RetryPolicy:
    """Retry retryable backend failures with exponential backoff.

    With the defaults a call is attempted at most 3 times, sleeping 0.25 s and
    then 0.5 s between attempts.
    """
    attempts: int = 3
    backoff: float = 0.25
    sleep: Callable[[float], None] = time.sleep

    def call(self, fn: Callable[[], T], *, what: str = "backend call") -> T:
        delay = self.backoff
        for attempt in range(1, self.attempts + 1):
            try:
                return fn()
            except (NetworkError, APIError) as exc:
                retryable = isinstance(exc, NetworkError) or exc.retryable
                if not retryable or attempt == self.attempts:
                    raise
                logger.warning("%s failed (attempt %d/%d): %s", what, attempt, self.attempts, exc)
                self.sleep(delay)
                delay *= 2
        raise BackendError(f"{what}: no attempts made")  # attempts < 1


class HttpBackend:
    """
    JSON-over-HTTP transport shared by the remote backends.

    Parameters
    ----------
    endpoint : str
        Full URL the backend POSTs to.
    model : str
        Model name passed in the request body.
    api_key : str, optional
        Credential sent in the ``auth_header`` header (``"<scheme> <key>"``).
    timeout : float
        HTTP request timeout in seconds (default 30).
    session : requests.Session, optional
        Inject a custom ``requests.Session`` (useful for testing).
    retry : RetryPolicy, optional
        Retry policy for transport failures (default 3 attempts).
    """

    def __init__(
        self,
        endpoint: str,
        *,
        model: str = "",
        api_key: str | None = None,
        auth_header: str = "Authorization",
        auth_scheme: str = "Bearer",
        timeout: float = 30.0,
        session: Session | None = None,
        retry: RetryPolicy | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.retry = retry or RetryPolicy()
        self._session = session or requests.Session()
        if api_key:
            value = f"{auth_scheme} {api_key}" if auth_scheme else api_key
            self._session.headers.update({auth_header: value})

    @classmethod
    def from_config(cls, backend: BackendConfig, retry: RetryPolicy | None = None, **kwargs: Any):
        return cls(
            backend.endpoint,
            model=backend.model,
            api_key=backend.credential(),
            auth_header=backend.auth_header,
            auth_scheme=backend.auth_scheme,
            timeout=backend.timeout,
            retry=retry,
            **kwargs,
        )

    # ------------------------------------------------------------------
    # Low-level HTTP helpers
    # ------------------------------------------------------------------

    def _request(self, url: str, payload: dict[str, Any]) -> Response:
        """POST *payload* to *url*, raising on connection/timeout/non-2xx responses."""
        logger.debug("POST %s", url)
        try:
            response = self._session.post(url, json=payload, timeout=self.timeout)
        except requests.ConnectionError as exc:
            raise NetworkError(f"Connection error: {exc}") from exc
        except requests.Timeout as exc:
            raise NetworkError(f"Request timed out after {self.timeout}s") from exc

        if not response.ok:
            body = response.text[:200]
            if response.status_code in (400, 413) and any(
                marker in body.lower() for marker in _OVERFLOW_MARKERS
            ):
                raise ContextOverflowError(
                    f"Context overflow: {body}", status_code=response.status_code
                )
            raise APIError(
                f"API error {response.status_code}: {body}",
                status_code=response.status_code,
            )
        return response

    def _post(self, payload: dict[str, Any], url: str | None = None) -> Any:
        """POST with retries and return parsed JSON."""

        def attempt() -> Any:
            response = self._request(url or self.endpoint, payload)
            try:
                return response.json()
            except ValueError as exc:
                raise APIError(f"Invalid JSON response: {exc}") from exc

        return self.retry.call(attempt, what=f"POST {url or self.endpoint}")

    # ------------------------------------------------------------------
    # Convenience helpers
    # ------------------------------------------------------------------

    def close(self) -> None:
        """Close the underlying HTTP session."""
        self._session.close()

    def __enter__(self):
        return self

    def __exit__(self, *_: Any) -> None:
        self.close()

    def __repr__(self) -> str:
        return f"{type(self).__name__}(endpoint={self.endpoint!r}, model={self.model!r})"
