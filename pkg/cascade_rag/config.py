"""Pipeline configuration: loading, dotted-path access and validation.

The config file is a YAML document. Every scalar field is addressable by a
dotted path (``retrieval.dense_k``, ``backends.chat.endpoint``), which is also
the syntax of the CLI's ``--set path=value`` overrides. Environment variables
supply credentials only: a backend names the variable in ``credential_env``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping

import yaml

from .exceptions import ConfigError
from .models.namespace import NamespaceLabel, NamespaceSet

logger = logging.getLogger(__name__)

MOCK_SCHEME = "mock:"

BACKEND_NAMES: tuple[str, ...] = (
    "embedder",
    "chat",
    "reranker",
    "judge",
    "judge_secondary",
    "baseline_embedder",
    "index",
)


@dataclass(frozen=True)
class BackendConfig:
    """Endpoint and credential reference for one external service."""
    endpoint: str = MOCK_SCHEME
    model: str = ""
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    credential_env: str | None = None
    timeout: float = 30.0
    dimension: int | None = None

    @property
    def is_mock(self) -> bool:
        return self.endpoint.startswith(MOCK_SCHEME)

    @property
    def mock_options(self) -> str:
        """Everything after ``mock:`` (e.g. ``script=path.json``)."""
        return self.endpoint[len(MOCK_SCHEME):] if self.is_mock else ""

    def credential(self) -> str | None:
        """Read the credential from the environment variable named by ``credential_env``."""
        if not self.credential_env:
            return None
        return os.environ.get(self.credential_env)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BackendConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown backend field {k!r}" for k in unknown])
        return cls(**dict(data))


@dataclass(frozen=True)
class StageSwitches:
    rewrite: bool = True
    routing: bool = True
    pruning: bool = True
    rerank: bool = True


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError("expected an integer")
    return value


def _as_float(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("expected a number")
    return float(value)


def _as_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError("expected true/false")
    return value


def _as_str(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError("expected a string")
    return value


def _as_opt_str(value: Any) -> str | None:
    return None if value is None else _as_str(value)


def _as_str_tuple(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise TypeError("expected a list of strings")
    return tuple(value)


# dotted path -> (PipelineConfig attribute, converter)
_FIELDS: dict[str, tuple[str, Callable[[Any], Any]]] = {
    "retrieval.dense_k": ("dense_k", _as_int),
    "retrieval.prune_k": ("prune_k", _as_int),
    "retrieval.rerank_k": ("rerank_k", _as_int),
    "retrieval.bm25.k1": ("bm25_k1", _as_float),
    "retrieval.bm25.b": ("bm25_b", _as_float),
    "context.token_budget": ("token_budget", _as_int),
    "routing.vote_count": ("vote_count", _as_int),
    "routing.top_n": ("route_top_n", _as_int),
    "routing.temperature": ("vote_temperature", _as_float),
    "routing.timeout": ("vote_timeout", _as_float),
    "routing.fallback": ("fallback_namespaces", _as_str_tuple),
    "rewrite.temperature": ("rewrite_temperature", _as_float),
    "rewrite.max_tokens": ("rewrite_max_tokens", _as_int),
    "generation.temperature": ("generation_temperature", _as_float),
    "generation.max_tokens": ("generation_max_tokens", _as_int),
    "retry.attempts": ("retry_attempts", _as_int),
    "retry.backoff": ("retry_backoff", _as_float),
    "index.path": ("index_path", _as_str),
    "index.baseline_path": ("baseline_index_path", _as_opt_str),
    "corpus.path": ("corpus_path", _as_str),
    "corpus.embed_batch_size": ("embed_batch_size", _as_int),
    "evaluation.word_cap": ("word_cap", _as_int),
    "evaluation.judge_reasks": ("judge_reasks", _as_int),
    "evaluation.concurrency": ("judge_concurrency", _as_int),
    "evaluation.recall_k": ("recall_k", _as_int),
    "batch.concurrency": ("batch_concurrency", _as_int),
    "service.host": ("service_host", _as_str),
    "service.port": ("service_port", _as_int),
    "service.token_env": ("service_token_env", _as_opt_str),
}

_SWITCH_PATHS = {f"stages.{f.name}": f.name for f in fields(StageSwitches)}


@dataclass(frozen=True)
class PipelineConfig:
    """All stage parameters. Defaults reproduce the full pipeline."""
    namespaces: tuple[NamespaceLabel, ...] = ()
    dense_k: int = 100
    prune_k: int = 20
    rerank_k: int = 10
    token_budget: int = 8192
    vote_count: int = 4
    route_top_n: int = 2
    stage_switches: StageSwitches = field(default_factory=StageSwitches)
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    vote_temperature: float = 0.7
    vote_timeout: float = 20.0
    fallback_namespaces: tuple[str, ...] = ()
    rewrite_temperature: float = 0.0
    rewrite_max_tokens: int = 256
    generation_temperature: float = 0.0
    generation_max_tokens: int = 1024
    retry_attempts: int = 3
    retry_backoff: float = 0.25
    backends: Mapping[str, BackendConfig] = field(default_factory=dict)
    index_path: str = "data/index"
    baseline_index_path: str | None = None
    corpus_path: str = "data/corpus.jsonl"
    embed_batch_size: int = 64
    word_cap: int = 300
    judge_reasks: int = 2
    judge_concurrency: int = 4
    recall_k: int = 10
    batch_concurrency: int = 4
    service_host: str = "127.0.0.1"
    service_port: int = 8080
    service_token_env: str | None = "CASCADE_RAG_SERVICE_TOKEN"

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "namespaces",
            tuple(
                n if isinstance(n, NamespaceLabel) else NamespaceLabel(n) for n in self.namespaces
            ),
        )
        backends = {name: BackendConfig() for name in ("embedder", "chat", "reranker", "judge")}
        backends.update(self.backends)
        object.__setattr__(self, "backends", MappingProxyType(backends))

    @property
    def namespace_set(self) -> NamespaceSet:
        return NamespaceSet(self.namespaces)

    def backend(self, name: str) -> BackendConfig | None:
        return self.backends.get(name)

    def with_overrides(self, **changes: Any) -> "PipelineConfig":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> "PipelineConfig":
        """Build from a parsed YAML mapping, collecting every problem before raising."""
        raw = dict(raw or {})
        errors: list[str] = []
        kwargs: dict[str, Any] = {}
        switches: dict[str, bool] = {}

        names = raw.pop("namespaces", [])
        try:
            kwargs["namespaces"] = tuple(NamespaceLabel(n) for n in _as_str_tuple(names))
        except (TypeError, ValueError) as exc:
            errors.append(f"namespaces: {exc}")

        backends: dict[str, BackendConfig] = {}
        for name, data in (raw.pop("backends", None) or {}).items():
            if name not in BACKEND_NAMES:
                errors.append(f"backends.{name}: unknown backend")
                continue
            if isinstance(data, str):
                data = {"endpoint": data}
            try:
                backends[name] = BackendConfig.from_dict(data or {})
            except (ConfigError, TypeError) as exc:
                errors.append(f"backends.{name}: {exc}")
        kwargs["backends"] = backends

        for path, value in _flatten(raw):
            if path in _SWITCH_PATHS:
                try:
                    switches[_SWITCH_PATHS[path]] = _as_bool(value)
                except TypeError as exc:
                    errors.append(f"{path}: {exc}")
                continue
            entry = _FIELDS.get(path)
            if entry is None:
                errors.append(f"{path}: unknown setting")
                continue
            attr, convert = entry
            try:
                kwargs[attr] = convert(value)
            except TypeError as exc:
                errors.append(f"{path}: {exc}")

        if errors:
            raise ConfigError(errors)
        return cls(stage_switches=StageSwitches(**switches), **kwargs)


def _flatten(data: Mapping[str, Any], prefix: str = "") -> Iterable[tuple[str, Any]]:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            yield from _flatten(value, prefix=f"{path}.")
        else:
            yield path, value


def apply_overrides(raw: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    """Apply ``path=value`` overrides to a raw config mapping; values are YAML-parsed."""
    for item in overrides:
        path, sep, text = item.partition("=")
        if not sep or not path.strip():
            raise ConfigError(f"override {item!r} must look like path=value")
        node = raw
        parts = path.strip().split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = yaml.safe_load(text) if text.strip() else None
    return raw


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    """Load a YAML config file (or defaults when *path* is ``None``)."""
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    raw = apply_overrides(raw, overrides)
    logger.debug("loaded config from %s", path or "<defaults>")
    return PipelineConfig.from_dict(raw)


def config_get(config: PipelineConfig, path: str) -> Any:
    """Return the value addressed by a dotted *path*."""
    if path == "namespaces":
        return [label.name for label in config.namespaces]
    if path in _SWITCH_PATHS:
        return getattr(config.stage_switches, _SWITCH_PATHS[path])
    if path.startswith("backends."):
        _, name, *rest = path.split(".")
        backend = config.backend(name)
        if backend is None or len(rest) != 1 or not hasattr(backend, rest[0]):
            raise KeyError(path)
        return getattr(backend, rest[0])
    entry = _FIELDS.get(path)
    if entry is None:
        raise KeyError(path)
    return getattr(config, entry[0])


@dataclass(frozen=True)
class ConfigReport:
    """Result of :func:`validate_config`: the config plus every violated constraint."""
    config: PipelineConfig
    errors: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_for_errors(self) -> PipelineConfig:
        if self.errors:
            raise ConfigError(list(self.errors))
        return self.config


def validate_config(config: PipelineConfig) -> ConfigReport:
    """Check every cross-field constraint; never raises."""
    errors: list[str] = []
    for name in ("dense_k", "prune_k", "rerank_k", "token_budget", "vote_count", "route_top_n",
                 "retry_attempts", "embed_batch_size", "word_cap", "judge_concurrency",
                 "recall_k", "batch_concurrency"):
        if getattr(config, name) < 1:
            errors.append(f"{name} must be positive")
    if config.prune_k > config.dense_k:
        errors.append("prune_k > dense_k")
    if config.rerank_k > config.prune_k:
        errors.append("rerank_k > prune_k")
    if config.token_budget < config.rerank_k:
        errors.append("token_budget < rerank_k")

    ns = config.namespace_set
    if not len(ns):
        errors.append("namespace_set is empty")
    if ns.has_duplicates:
        errors.append("namespace_set has duplicate labels")
    if config.route_top_n > len(ns):
        errors.append(f"route_top_n ({config.route_top_n}) > |namespace_set| ({len(ns)})")
    for name in config.fallback_namespaces:
        if name not in ns:
            errors.append(f"fallback namespace {name!r} not in namespace_set")

    if config.bm25_k1 <= 0:
        errors.append("bm25 k1 must be positive")
    if not 0.0 <= config.bm25_b <= 1.0:
        errors.append("bm25 b must be in [0, 1]")
    for name in ("vote_temperature", "rewrite_temperature", "generation_temperature",
                 "retry_backoff", "judge_reasks"):
        if getattr(config, name) < 0:
            errors.append(f"{name} must be >= 0")
    if config.vote_timeout <= 0:
        errors.append("vote_timeout must be positive")
    return ConfigReport(config=config, errors=tuple(errors))
