"""Query rewriting, context aggregation, generation and the stage orchestrator."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

from .clients.base import ChatClient, Embedder, Reranker
from .clients.factory import build_chat, build_embedder, build_reranker, retry_policy
from .config import PipelineConfig, StageSwitches, validate_config
from .exceptions import BackendError, DataError, RagError, StageError
from .indexing import open_index
from .models.context import AggregatedContext
from .models.enums import PromptKind, Stage
from .models.messages import ChatRequest
from .models.query import QueryRecord
from .models.trace import AnswerTrace
from .prompts import load as load_prompt
from .retrieval import dense_stage, prune_stage, rerank_stage
from .routing import route
from .store.base import VectorStore

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Stage 1: rewrite
# ----------------------------------------------------------------------

class Rewrite(NamedTuple):
    text: str
    degraded: bool


def rewrite_query(raw: str, config: PipelineConfig, chat: ChatClient) -> Rewrite:
    """Correct typos and wording; falls back to *raw* when disabled or on failure."""
    if not raw.strip():
        raise ValueError("query is empty")
    if not config.stage_switches.rewrite:
        return Rewrite(raw, False)
    request = ChatRequest(
        system_prompt=load_prompt("rewrite"),
        user_content=raw,
        temperature=config.rewrite_temperature,
        max_output_tokens=config.rewrite_max_tokens,
        kind=PromptKind.REWRITE,
    )
    try:
        text = chat.complete(request).strip()
    except BackendError as exc:
        logger.warning("rewrite failed, using the raw query: %s", exc)
        return Rewrite(raw, True)
    if not text:
        logger.warning("rewrite returned nothing, using the raw query")
        return Rewrite(raw, True)
    return Rewrite(text, False)


# ----------------------------------------------------------------------
# Stage 4: aggregate
# ----------------------------------------------------------------------

def aggregate_context(passages: Sequence[tuple[str, str]], budget: int) -> AggregatedContext:
    """Concatenate passages within *budget* whitespace tokens.

    Over budget, passage *i* keeps its first ``max(1, t_i * budget // T)``
    tokens. If the one-token minimum pushes the total over, the largest
    allocations (earliest passage first) give back one token at a time.
    """
    passages = [(pid, text) for pid, text in passages]
    if not passages:
        return AggregatedContext(passages=(), total_tokens=0, truncated=False)
    if budget < len(passages):
        raise ValueError(f"token budget {budget} is smaller than the {len(passages)} passages")

    words = [text.split() for _, text in passages]
    counts = [len(w) for w in words]
    total = sum(counts)
    if total <= budget:
        return AggregatedContext(passages=tuple(passages), total_tokens=total, truncated=False)

    alloc = [min(t, max(1, t * budget // total)) for t in counts]
    while sum(alloc) > budget:
        i = max(range(len(alloc)), key=lambda j: (alloc[j], -j))
        alloc[i] -= 1

    cut = tuple((pid, " ".join(w[:n])) for (pid, _), w, n in zip(passages, words, alloc))
    return AggregatedContext(passages=cut, total_tokens=sum(alloc), truncated=True)


# ----------------------------------------------------------------------
# Stage 5: generate
# ----------------------------------------------------------------------

def generate_answer(
    context: AggregatedContext,
    query: str,
    chat: ChatClient,
    config: PipelineConfig | None = None,
) -> str:
    config = config or PipelineConfig()
    request = ChatRequest(
        system_prompt=load_prompt("generate_system"),
        user_content=load_prompt("generate").format(passages=context.text, query=query),
        temperature=config.generation_temperature,
        max_output_tokens=config.generation_max_tokens,
        kind=PromptKind.GENERATE,
    )
    return chat.complete(request).strip()


# ----------------------------------------------------------------------
# Ablation ladder
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AblationProfile:
    """A named stage combination.

    With neither pruning nor rerank the dense stage fetches ``rerank_k``
    passages directly; with pruning but no rerank, BM25 keeps ``rerank_k``.
    """
    name: str
    switches: StageSwitches | None
    baseline_embedder: bool = False

    def apply(self, config: PipelineConfig) -> PipelineConfig:
        if self.switches is None:
            return config
        return config.with_overrides(stage_switches=self.switches)


PROFILES: dict[str, AblationProfile] = {
    p.name: p
    for p in (
        AblationProfile(
            "Baseline", StageSwitches(False, False, False, False), baseline_embedder=True
        ),
        AblationProfile("+Arctic-M", StageSwitches(False, False, False, False)),
        AblationProfile("+Routing", StageSwitches(False, True, False, False)),
        AblationProfile("+Pruning", StageSwitches(False, True, True, False)),
        AblationProfile("+Rerank", StageSwitches(False, True, True, True)),
        AblationProfile("+Rewrite", StageSwitches(True, True, True, True)),
        AblationProfile("config", None),
    )
}

LADDER: tuple[str, ...] = ("Baseline", "+Arctic-M", "+Routing", "+Pruning", "+Rerank", "+Rewrite")
DEFAULT_PROFILE = "+Rewrite"


def get_profile(name: str) -> AblationProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {', '.join(PROFILES)}") from None


# ----------------------------------------------------------------------
# Orchestrator
# ----------------------------------------------------------------------

@dataclass
class Pipeline:
    """
    Runs queries through the enabled stages and records an :class:`AnswerTrace`.

    Parameters
    ----------
    config : PipelineConfig
        Validated configuration.
    chat, embedder, reranker : backend clients
        Used for rewrite/routing/generation, dense retrieval and rerank.
    store : VectorStore
        Index searched by the dense stage.
    baseline_embedder, baseline_store : optional
        Embedder and index used by the Baseline profile. When missing the
        primary ones are used.
    """
    config: PipelineConfig
    chat: ChatClient
    embedder: Embedder
    reranker: Reranker
    store: VectorStore
    baseline_embedder: Embedder | None = None
    baseline_store: VectorStore | None = None
    clock: Callable[[], float] = field(default=time.perf_counter, repr=False)

    @classmethod
    def from_config(cls, config: PipelineConfig, store: VectorStore | None = None) -> "Pipeline":
        """Build every backend named by *config* and open its index."""
        validate_config(config).raise_for_errors()
        retry = retry_policy(config)
        baseline_embedder = baseline_store = None
        baseline = config.backend("baseline_embedder")
        if baseline is not None and config.baseline_index_path:
            baseline_embedder = build_embedder(baseline, retry)
            baseline_store = open_index(config, path=config.baseline_index_path, retry=retry)
        return cls(
            config=config,
            chat=build_chat(config.backends["chat"], retry),
            embedder=build_embedder(config.backends["embedder"], retry),
            reranker=build_reranker(config.backends["reranker"], retry),
            store=store if store is not None else open_index(config, retry=retry),
            baseline_embedder=baseline_embedder,
            baseline_store=baseline_store,
        )

    def _retrieval_backends(self, profile: AblationProfile) -> tuple[Embedder, VectorStore]:
        if profile.baseline_embedder:
            if self.baseline_embedder is not None and self.baseline_store is not None:
                return self.baseline_embedder, self.baseline_store
            logger.warning("no baseline embedder/index configured; Baseline uses the primary ones")
        return self.embedder, self.store

    def run_query(
        self,
        raw: str,
        profile: str | AblationProfile = DEFAULT_PROFILE,
        question_id: str | None = None,
    ) -> AnswerTrace:
        """Answer *raw* under *profile*.

        Raises :class:`StageError` carrying the partial trace when a stage fails.
        """
        profile = get_profile(profile) if isinstance(profile, str) else profile
        config = profile.apply(self.config)
        switches = config.stage_switches
        embedder, store = self._retrieval_backends(profile)
        trace = AnswerTrace(raw_query=raw, profile=profile.name, question_id=question_id)
        record = QueryRecord(raw_query=raw)
        started = self.clock()
        stage = Stage.REWRITE

        def timed(name: Stage, seconds: float) -> None:
            nonlocal record
            record = record.with_timing(name.value, seconds)
            trace.timings = dict(record.stage_timings)

        try:
            if switches.rewrite:
                t0 = self.clock()
                rewrite = rewrite_query(raw, config, self.chat)
                record = record.with_rewrite(rewrite.text)
                trace.rewritten_query = rewrite.text
                trace.degraded[Stage.REWRITE.value] = rewrite.degraded
                timed(Stage.REWRITE, self.clock() - t0)

            if switches.routing:
                stage = Stage.ROUTE
                t0 = self.clock()
                labels = route(record.effective_query, config, self.chat, store.total_count())
                record = record.with_routes(tuple(labels))
                trace.routed_namespaces = [label.name for label in labels]
                timed(Stage.ROUTE, self.clock() - t0)
            trace.scanned_fraction = _scanned_fraction(store, record, config)

            stage = Stage.DENSE
            dense_k = config.dense_k if (switches.pruning or switches.rerank) else config.rerank_k
            result = dense_stage(record, config, store, embedder, k=dense_k, clock=self.clock)
            candidates = result.candidates
            trace.stage_ids[Stage.DENSE.value] = result.ids
            timed(Stage.DENSE, result.seconds)

            if switches.pruning:
                stage = Stage.PRUNE
                prune_k = config.prune_k if switches.rerank else config.rerank_k
                result = prune_stage(record, candidates, config, k=prune_k, clock=self.clock)
                candidates = result.candidates
                trace.stage_ids[Stage.PRUNE.value] = result.ids
                timed(Stage.PRUNE, result.seconds)

            if switches.rerank:
                stage = Stage.RERANK
                result = rerank_stage(record, candidates, config, self.reranker, clock=self.clock)
                candidates = result.candidates
                trace.stage_ids[Stage.RERANK.value] = result.ids
                trace.degraded[Stage.RERANK.value] = result.degraded
                timed(Stage.RERANK, result.seconds)

            stage = Stage.AGGREGATE
            t0 = self.clock()
            context = aggregate_context(
                [(c.id, c.passage.text) for c in candidates], config.token_budget
            )
            trace.context_tokens = context.total_tokens
            trace.context_truncated = context.truncated
            timed(Stage.AGGREGATE, self.clock() - t0)

            stage = Stage.GENERATE
            t0 = self.clock()
            trace.answer = generate_answer(context, record.effective_query, self.chat, config)
            timed(Stage.GENERATE, self.clock() - t0)
        except (RagError, ValueError) as exc:
            trace.error = str(exc)
            trace.error_stage = stage.value
            trace.total_seconds = self.clock() - started
            logger.error("query %s failed at %s: %s", question_id or "-", stage.value, exc)
            raise StageError(stage.value, exc, trace) from exc

        trace.total_seconds = self.clock() - started
        logger.info(
            "query %s [%s] answered from %d passages in %.2fs",
            question_id or "-", profile.name, len(candidates), trace.total_seconds,
        )
        return trace

    def run_batch(
        self,
        questions: Iterable[tuple[str, str]],
        profile: str | AblationProfile = DEFAULT_PROFILE,
        *,
        concurrency: int | None = None,
        on_done: Callable[[AnswerTrace], None] | None = None,
    ) -> list[AnswerTrace]:
        """Run ``(question_id, question)`` pairs concurrently.

        Failed queries yield their partial trace (with ``error`` set) instead
        of raising. Traces are returned in input order; *on_done* sees them in
        completion order.
        """
        questions = list(questions)
        workers = max(1, concurrency or self.config.batch_concurrency)

        def one(item: tuple[str, str]) -> AnswerTrace:
            qid, text = item
            try:
                trace = self.run_query(text, profile, question_id=qid)
            except StageError as exc:
                trace = exc.trace
            if on_done is not None:
                on_done(trace)
            return trace

        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="query") as pool:
            return list(pool.map(one, questions))


def _scanned_fraction(
    store: VectorStore, record: QueryRecord, config: PipelineConfig
) -> float | None:
    searched = record.routed_namespaces or tuple(config.namespace_set)
    try:
        return store.scanned_fraction(searched)
    except (ValueError, DataError, BackendError) as exc:
        logger.debug("scanned fraction unavailable: %s", exc)
        return None
