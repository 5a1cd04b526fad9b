"""Namespace routing by self-consistency voting over repeated classifications."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Mapping, Sequence

from .clients.base import ChatClient
from .config import PipelineConfig
from .exceptions import BackendError
from .models.enums import PromptKind
from .models.messages import ChatRequest
from .models.namespace import NamespaceLabel, NamespaceSet
from .prompts import load as load_prompt

logger = logging.getLogger(__name__)

BOXED = "boxed{"


def parse_boxed(reply: str, namespaces: NamespaceSet) -> frozenset[NamespaceLabel]:
    """Labels named in the last brace-balanced ``boxed{...}`` group of *reply*.

    The group content is split on commas and semicolons; each item is matched
    case-insensitively against *namespaces* and unknown items are dropped.
    """
    start = reply.rfind(BOXED)
    while start != -1:
        depth = 0
        for end in range(start + len(BOXED) - 1, len(reply)):
            ch = reply[end]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    content = reply[start + len(BOXED):end]
                    return _match_labels(content, namespaces)
        # unbalanced: try the previous occurrence
        start = reply.rfind(BOXED, 0, start)
    return frozenset()


def _match_labels(content: str, namespaces: NamespaceSet) -> frozenset[NamespaceLabel]:
    items = content.replace(";", ",").replace("{", " ").replace("}", " ").split(",")
    found = (namespaces.find(item) for item in items)
    return frozenset(label for label in found if label is not None)


def routing_prompt(question: str, namespaces: NamespaceSet) -> str:
    choices = "\n".join(f"- {label.name}" for label in namespaces)
    return load_prompt("route").format(question=question, choices_str=choices)


def classify_once(
    question: str,
    namespaces: NamespaceSet,
    chat: ChatClient,
    *,
    temperature: float = 0.7,
    seed: int | None = None,
) -> frozenset[NamespaceLabel]:
    """One routing vote. A backend failure is an abstention (empty set)."""
    request = ChatRequest(
        system_prompt=load_prompt("generate_system"),
        user_content=routing_prompt(question, namespaces),
        temperature=temperature,
        max_output_tokens=256,
        seed=seed,
        kind=PromptKind.ROUTE,
    )
    try:
        reply = chat.complete(request)
    except BackendError as exc:
        logger.warning("routing vote %s abstained: %s", seed, exc)
        return frozenset()
    return parse_boxed(reply, namespaces)


@dataclass(frozen=True)
class VoteSet:
    votes: tuple[frozenset[NamespaceLabel], ...]

    @property
    def tally(self) -> dict[NamespaceLabel, int]:
        counts: dict[NamespaceLabel, int] = {}
        for vote in self.votes:
            for label in vote:
                counts[label] = counts.get(label, 0) + 1
        return counts

    @property
    def abstained(self) -> bool:
        return not any(self.votes)

    def first_appearance(self, label: NamespaceLabel) -> float:
        for i, vote in enumerate(self.votes):
            if label in vote:
                return i
        return math.inf


def tally_votes(
    votes: Sequence[frozenset[NamespaceLabel]],
    namespaces: NamespaceSet,
    top_n: int,
) -> list[NamespaceLabel]:
    """Rank every configured label by tally, earliest first vote, then label; keep *top_n*."""
    vote_set = VoteSet(tuple(votes))
    tally = vote_set.tally
    ranked = sorted(
        namespaces,
        key=lambda label: (-tally.get(label, 0), vote_set.first_appearance(label), label.key),
    )
    return ranked[:top_n]


def fallback_route(
    config: PipelineConfig,
    index_counts: Mapping[NamespaceLabel, int] | None = None,
) -> list[NamespaceLabel]:
    """Namespaces searched when every vote abstains.

    The configured fallback list wins; otherwise the largest namespaces by
    stored count (label ascending on ties), otherwise the first configured ones.
    """
    namespaces = config.namespace_set
    if config.fallback_namespaces:
        return [namespaces.resolve(n) for n in config.fallback_namespaces][:config.route_top_n]
    if index_counts:
        ranked = sorted(namespaces, key=lambda label: (-index_counts.get(label, 0), label.key))
        return ranked[:config.route_top_n]
    return list(namespaces)[:config.route_top_n]


def collect_votes(
    question: str,
    config: PipelineConfig,
    chat: ChatClient,
) -> list[frozenset[NamespaceLabel]]:
    """Run ``vote_count`` classifications concurrently; late votes count as abstentions."""
    namespaces = config.namespace_set
    pool = ThreadPoolExecutor(max_workers=config.vote_count, thread_name_prefix="route-vote")
    try:
        futures = [
            pool.submit(
                classify_once,
                question,
                namespaces,
                chat,
                temperature=config.vote_temperature,
                seed=i,
            )
            for i in range(config.vote_count)
        ]
        wait(futures, timeout=config.vote_timeout)
        votes: list[frozenset[NamespaceLabel]] = []
        for i, future in enumerate(futures):
            if not future.done():
                logger.warning("routing vote %d timed out after %.1fs", i, config.vote_timeout)
                votes.append(frozenset())
            elif future.exception() is not None:
                logger.warning("routing vote %d failed: %s", i, future.exception())
                votes.append(frozenset())
            else:
                votes.append(future.result())
        return votes
    finally:
        pool.shutdown(wait=False)


def route(
    question: str,
    config: PipelineConfig,
    chat: ChatClient,
    index_counts: Mapping[NamespaceLabel, int] | None = None,
) -> list[NamespaceLabel]:
    """Pick the ``route_top_n`` namespaces to search for *question*."""
    votes = collect_votes(question, config, chat)
    if not any(votes):
        chosen = fallback_route(config, index_counts)
        logger.warning("all %d routing votes abstained; falling back to %s",
                       len(votes), [label.name for label in chosen])
        return chosen
    chosen = tally_votes(votes, config.namespace_set, config.route_top_n)
    logger.debug("routed %r to %s", question[:60], [label.name for label in chosen])
    return chosen
