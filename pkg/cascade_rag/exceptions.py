"""Custom exceptions for the cascade RAG pipeline."""
from __future__ import annotations

from typing import Any


class RagError(Exception):
    """Base exception for all pipeline errors."""


class ConfigError(RagError):
    """Raised when a configuration violates one or more constraints."""

    def __init__(self, errors: list[str] | str):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


class DataError(RagError):
    """Raised when an input file or record is malformed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DuplicatePassageError(DataError):
    """Raised when a corpus contains the same passage id twice."""

    def __init__(self, passage_id: str, line: int | None = None):
        super().__init__(f"duplicate passage id {passage_id!r}", line=line)
        self.passage_id = passage_id


class UnknownNamespaceError(DataError):
    """Raised when a namespace is not part of the configured set."""

    def __init__(self, name: str):
        super().__init__(f"unknown namespace {name!r}")
        self.name = name


class DimensionMismatchError(DataError):
    """Raised when a vector does not match the index dimension."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"vector dimension {actual} does not match index dimension {expected}")
        self.expected = expected
        self.actual = actual


class InfeasibleAllocationError(DataError):
    """Raised when a stratified sample cannot be drawn from the available candidates."""


class BackendError(RagError):
    """Raised when a model or index backend fails."""


class APIError(BackendError):
    """Raised when a backend returns an error response."""

    def __init__(self, message: str, status_code: int | None = None):
        super().__init__(message)
        self.status_code = status_code

    @property
    def retryable(self) -> bool:
        return self.status_code is None or self.status_code == 429 or self.status_code >= 500


class NetworkError(BackendError):
    """Raised when a network/connectivity error occurs."""


class ContextOverflowError(APIError):
    """Raised when a prompt exceeds the backend's context limit."""

    @property
    def retryable(self) -> bool:
        return False


class StageError(RagError):
    """Raised when a pipeline stage fails fatally for one query.

    ``trace`` holds everything recorded before the failure.
    """

    def __init__(self, stage: str, cause: Exception, trace: Any = None):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.trace = trace
