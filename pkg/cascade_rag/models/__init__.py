"""Shared domain models."""
from .enums import Metric, PromptKind, Stage
from .namespace import NamespaceLabel, NamespaceSet
from .passage import Passage
from .embedding import EmbeddingVector
from .messages import ChatRequest, RerankRequest
from .candidate import RetrievalCandidate
from .query import QueryRecord
from .context import AggregatedContext
from .trace import AnswerTrace
from .judge import EvalRecord, JudgeScore
from .benchmark import BenchmarkItem, QuestionCategory, StratumAllocation, CATEGORIES

__all__ = [
    "Metric",
    "PromptKind",
    "Stage",
    "NamespaceLabel",
    "NamespaceSet",
    "Passage",
    "EmbeddingVector",
    "ChatRequest",
    "RerankRequest",
    "RetrievalCandidate",
    "QueryRecord",
    "AggregatedContext",
    "AnswerTrace",
    "EvalRecord",
    "JudgeScore",
    "BenchmarkItem",
    "QuestionCategory",
    "StratumAllocation",
    "CATEGORIES",
]
