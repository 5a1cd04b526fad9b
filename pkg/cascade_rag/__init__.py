"""Cascade RAG - routed hybrid-retrieval question answering with an evaluation harness"""
from .config import PipelineConfig, load_config, validate_config
from .pipeline import Pipeline, AblationProfile, PROFILES, LADDER, aggregate_context, rewrite_query
from .routing import route, parse_boxed
from .retrieval import bm25_scores, dense_stage, prune_stage, rerank_stage
from .evaluation import apply_word_cap, judge, recall_at_k, ablation_report, judge_agreement
from .benchgen import allocate, sample, ingest_tagged
from .store import LocalIndex, RemoteIndex
from .models import (
    NamespaceLabel, NamespaceSet, Passage, EmbeddingVector, RetrievalCandidate,
    QueryRecord, AggregatedContext, AnswerTrace, EvalRecord, JudgeScore, Metric, Stage,
)
from .exceptions import (
    RagError, ConfigError, DataError, BackendError, APIError, NetworkError, StageError,
)

__all__ = [
    "PipelineConfig", "load_config", "validate_config",
    "Pipeline", "AblationProfile", "PROFILES", "LADDER", "aggregate_context", "rewrite_query",
    "route", "parse_boxed",
    "bm25_scores", "dense_stage", "prune_stage", "rerank_stage",
    "apply_word_cap", "judge", "recall_at_k", "ablation_report", "judge_agreement",
    "allocate", "sample", "ingest_tagged",
    "LocalIndex", "RemoteIndex",
    "NamespaceLabel", "NamespaceSet", "Passage", "EmbeddingVector", "RetrievalCandidate",
    "QueryRecord", "AggregatedContext", "AnswerTrace", "EvalRecord", "JudgeScore",
    "Metric", "Stage",
    "RagError", "ConfigError", "DataError", "BackendError", "APIError", "NetworkError",
    "StageError",
]

__version__ = "0.1.0"
