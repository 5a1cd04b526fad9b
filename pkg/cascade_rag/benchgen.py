"""Benchmark construction: tagged Q&A ingest and proportional stratified sampling."""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .exceptions import InfeasibleAllocationError
from .jsonl import read_jsonl
from .models.benchmark import BenchmarkItem, Stratum, StratumAllocation, category
from .store.corpus import read_tags

logger = logging.getLogger(__name__)

DEFAULT_TARGET = 500


def allocate(
    counts: Mapping[Stratum, int], target: int = DEFAULT_TARGET
) -> dict[Stratum, StratumAllocation]:
    """
    Split *target* questions across strata in proportion to their candidate counts.

    Each stratum first gets ``ceil(N_c / sum(N) * target)``. The ceilings
    overshoot, so the surplus is removed one question at a time from the
    stratum whose allocation most exceeds its exact share (ties: ascending
    stratum). Non-empty strata keep at least one question unless there are
    more non-empty strata than *target*.

    Parameters
    ----------
    counts : mapping
        Candidate count per ``(topic, format)`` stratum.
    target : int
        Benchmark size (default 500).

    Returns
    -------
    dict
        :class:`StratumAllocation` per stratum, in ascending stratum order.

    Raises
    ------
    InfeasibleAllocationError
        If there are fewer candidates than *target*.
    """
    if target < 1:
        raise ValueError("target must be positive")
    if any(n < 0 for n in counts.values()):
        raise ValueError("candidate counts must be non-negative")
    total = sum(counts.values())
    if total < target:
        raise InfeasibleAllocationError(f"only {total} candidates for a target of {target}")

    strata = sorted(counts)
    exact = {s: Fraction(counts[s] * target, total) for s in strata}
    raw = {s: min(counts[s], -(-counts[s] * target // total)) for s in strata}
    non_empty = sum(1 for s in strata if counts[s] > 0)
    floor_one = non_empty <= target
    minimum = {s: 1 if (floor_one and counts[s] > 0) else 0 for s in strata}

    allocated = dict(raw)
    surplus = sum(allocated.values()) - target
    while surplus > 0:
        reducible = [s for s in strata if allocated[s] > minimum[s]]
        chosen = min(reducible, key=lambda s: (exact[s] - allocated[s], s))
        allocated[chosen] -= 1
        surplus -= 1

    return {
        s: StratumAllocation(
            stratum=s, candidate_count=counts[s], raw=raw[s], allocated=allocated[s]
        )
        for s in strata
    }


def stratum_counts(items: Iterable[BenchmarkItem]) -> dict[Stratum, int]:
    return dict(Counter(item.stratum for item in items))


AllocationLike = Mapping[Stratum, Union[int, StratumAllocation]]


def sample(
    candidates: Sequence[BenchmarkItem],
    allocation: AllocationLike,
    seed: int,
) -> list[BenchmarkItem]:
    """Draw the allocated number of items from each stratum, uniformly without replacement.

    Draws use a PCG64 generator seeded with *seed*, visiting strata in
    ascending order and each stratum's items in question id order. The
    result is sorted by topic, format and question id.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    groups: dict[Stratum, list[BenchmarkItem]] = defaultdict(list)
    for item in candidates:
        groups[item.stratum].append(item)

    chosen: list[BenchmarkItem] = []
    for stratum in sorted(allocation):
        entry = allocation[stratum]
        wanted = entry.allocated if isinstance(entry, StratumAllocation) else int(entry)
        if wanted == 0:
            continue
        pool = sorted(groups.get(stratum, []), key=lambda item: item.question_id)
        if wanted > len(pool):
            raise InfeasibleAllocationError(
                f"stratum {stratum} has {len(pool)} candidates, {wanted} requested"
            )
        picks = rng.choice(len(pool), size=wanted, replace=False)
        chosen.extend(pool[int(i)] for i in picks)
    chosen.sort(key=lambda item: (item.topic, item.format, item.question_id))
    return chosen


@dataclass
class IngestResult:
    items: list[BenchmarkItem] = field(default_factory=list)
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def report(self) -> str:
        return "\n".join(f"line {line}: {reason}" for line, reason in self.rejected)


def ingest_tagged(qa_path: str | Path, tag_path: str | Path) -> IngestResult:
    """
    Join Q&A records with document tags.

    A record's stratum is the topic and format of its first document. Records
    with an unknown category, the wrong number of documents for their category,
    a document missing from the tag file, or an untagged document are rejected
    and reported with their line number.
    """
    tags = read_tags(tag_path)
    result = IngestResult()
    seen: set[str] = set()
    for line_no, record in read_jsonl(qa_path):
        qid = str(record.get("question_id") or record.get("id") or "").strip()
        if not qid:
            result.rejected.append((line_no, "missing question id"))
            continue
        if qid in seen:
            result.rejected.append((line_no, f"duplicate question id {qid!r}"))
            continue
        name = str(record.get("category", ""))
        rule = category(name)
        if rule is None:
            result.rejected.append((line_no, f"{qid}: unknown category {name!r}"))
            continue
        doc_ids = [str(d) for d in record.get("document_ids", [])]
        if len(doc_ids) != rule.required_docs:
            result.rejected.append(
                (line_no, f"{qid}: {rule.name} needs {rule.required_docs} document(s), "
                          f"got {len(doc_ids)}")
            )
            continue
        dangling = [d for d in doc_ids if d not in tags]
        if dangling:
            missing = ", ".join(dangling)
            result.rejected.append((line_no, f"{qid}: unknown document id(s) {missing}"))
            continue
        topic, fmt = tags[doc_ids[0]]
        if not topic or not fmt:
            result.rejected.append(
                (line_no, f"{qid}: document {doc_ids[0]} has no topic/format tag")
            )
            continue
        seen.add(qid)
        result.items.append(
            BenchmarkItem(
                question_id=qid,
                question=str(record.get("question", "")),
                answer=str(record.get("answer", "")),
                category=rule.name,
                document_ids=tuple(doc_ids),
                topic=topic,
                format=fmt,
            )
        )
    if result.rejected:
        logger.warning("rejected %d of %d Q&A records", len(result.rejected),
                       len(result.rejected) + len(result.items))
    return result
