"""Judging, Recall@k, the ablation report and judge agreement."""
from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .clients.base import ChatClient
from .config import PipelineConfig
from .exceptions import BackendError
from .models.benchmark import BenchmarkItem, category
from .models.enums import Metric, PromptKind
from .models.judge import EvalRecord, JudgeScore
from .models.messages import ChatRequest
from .models.passage import Passage
from .models.trace import AnswerTrace
from .pipeline import LADDER
from .prompts import load as load_prompt

logger = logging.getLogger(__name__)

PRIMARY = "primary"
SECONDARY = "secondary"

_VERDICT = re.compile(r"^\s*SCORE:\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+))\s*$", re.MULTILINE)


def apply_word_cap(answer: str, cap: int) -> str:
    """Keep the first *cap* whitespace-delimited words, joined by single spaces."""
    if cap < 1:
        raise ValueError("cap must be positive")
    words = answer.split()
    if len(words) <= cap:
        return answer
    return " ".join(words[:cap])


def parse_verdict(reply: str) -> float | None:
    """The number on the last ``SCORE: <number>`` line of *reply*."""
    matches = _VERDICT.findall(reply)
    return float(matches[-1]) if matches else None


def _judge_prompt(record: EvalRecord, metric: Metric, answer: str) -> str:
    if metric is Metric.CORRECTNESS:
        return load_prompt("judge_correctness").format(
            question=record.question, gold_answer=record.gold_answer, answer=answer
        )
    return load_prompt("judge_faithfulness").format(
        passages="\n\n".join(record.retrieved_passages),
        question=record.question,
        answer=answer,
    )


def judge(
    record: EvalRecord,
    metric: Metric,
    judge_client: ChatClient,
    capped: bool,
    *,
    cap: int = 300,
    reasks: int = 2,
    judge_name: str = PRIMARY,
) -> JudgeScore:
    """Grade one answer on *metric*.

    A reply without a verdict line is re-asked up to *reasks* times; after
    that (or on a backend failure) the score is recorded as missing. Verdicts
    outside the metric's range are clamped and flagged.
    """
    answer = apply_word_cap(record.answer, cap) if capped else record.answer
    system = load_prompt("generate_system")
    user = _judge_prompt(record, metric, answer)
    reply = ""
    value: float | None = None
    try:
        for attempt in range(reasks + 1):
            request = ChatRequest(system_prompt=system, user_content=user, kind=PromptKind.JUDGE)
            reply = judge_client.complete(request)
            value = parse_verdict(reply)
            if value is not None:
                break
            user = load_prompt("judge_reask").format(reply=reply)
            logger.debug("judge reply for %s had no verdict (attempt %d)",
                         record.question_id, attempt + 1)
    except BackendError as exc:
        logger.warning("judge %s failed on %s/%s: %s",
                       judge_name, record.question_id, metric.value, exc)
        return JudgeScore(metric, None, rationale=str(exc), judge=judge_name, capped=capped)

    if value is None:
        logger.warning("no %s verdict for %s after %d re-asks",
                       metric.value, record.question_id, reasks)
        return JudgeScore(metric, None, rationale=reply, judge=judge_name, capped=capped)
    low, high = metric.bounds
    clamped = not low <= value <= high
    if clamped:
        logger.warning("%s verdict %s for %s clamped to [%g, %g]",
                       metric.value, value, record.question_id, low, high)
        value = min(max(value, low), high)
    return JudgeScore(metric, value, rationale=reply, judge=judge_name, capped=capped,
                      clamped=clamped)


def recall_at_k(retrieved: Sequence[str], gold: Iterable[str], k: int) -> float:
    """Share of *gold* ids found among the first *k* of *retrieved*."""
    if k < 1:
        raise ValueError("k must be positive")
    gold = set(gold)
    if not gold:
        raise ValueError("gold id set is empty")
    return len(gold & set(retrieved[:k])) / len(gold)


# ----------------------------------------------------------------------
# Building and scoring evaluation records
# ----------------------------------------------------------------------

def build_records(
    traces: Iterable[AnswerTrace],
    items: Iterable[BenchmarkItem],
    passages: Mapping[str, Passage] | None = None,
) -> list[EvalRecord]:
    """Join traces with their benchmark items by question id.

    Traces without a matching item are skipped. Retrieved passage texts come
    from *passages* (the corpus store) when given.
    """
    by_id = {item.question_id: item for item in items}
    passages = passages or {}
    records: list[EvalRecord] = []
    for trace in traces:
        item = by_id.get(trace.question_id or "")
        if item is None:
            logger.warning("trace %r has no benchmark item; skipped", trace.question_id)
            continue
        rule = category(item.category)
        if rule is not None and len(item.document_ids) != rule.required_docs:
            logger.warning("%s: %s needs %d gold documents, has %d", item.question_id,
                           rule.name, rule.required_docs, len(item.document_ids))
        retrieved = trace.final_ids
        records.append(
            EvalRecord(
                question_id=item.question_id,
                question=item.question,
                gold_answer=item.answer,
                gold_ids=list(item.document_ids),
                answer=trace.answer or "",
                retrieved_ids=retrieved,
                retrieved_passages=[passages[i].text for i in retrieved if i in passages],
                category=item.category,
                profile=trace.profile,
                seconds=trace.total_seconds,
            )
        )
    return records


def score_records(
    records: Sequence[EvalRecord],
    judges: Mapping[str, ChatClient],
    config: PipelineConfig,
    *,
    cap: int | None = None,
    concurrency: int | None = None,
) -> list[EvalRecord]:
    """Judge every record on both metrics, uncapped and capped, with every judge.

    Records whose answer is empty (failed queries) are left unscored.
    """
    cap = cap or config.word_cap
    jobs = [
        (record, metric, name, capped)
        for record in records
        if record.answer
        for name in judges
        for metric in Metric
        for capped in (False, True)
    ]

    def run(job: tuple[EvalRecord, Metric, str, bool]) -> JudgeScore:
        record, metric, name, capped = job
        return judge(record, metric, judges[name], capped, cap=cap,
                     reasks=config.judge_reasks, judge_name=name)

    workers = max(1, concurrency or config.judge_concurrency)
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="judge") as pool:
        scores = list(pool.map(run, jobs))
    for (record, _, _, _), score in zip(jobs, scores):
        record.scores.append(score)
    return list(records)


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

def _mean(values: Iterable[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


@dataclass(frozen=True)
class ReportRow:
    profile: str
    questions: int
    correctness: float | None
    correctness_capped: float | None
    faithfulness: float | None
    faithfulness_capped: float | None
    seconds: float | None
    recall: float | None
    missing: int
    failed: int

    def to_dict(self) -> dict[str, Any]:
        def r(v: float | None) -> float | None:
            return None if v is None else round(v, 3)

        return {
            "profile": self.profile,
            "questions": self.questions,
            "correctness": r(self.correctness),
            "correctness_capped": r(self.correctness_capped),
            "faithfulness": r(self.faithfulness),
            "faithfulness_capped": r(self.faithfulness_capped),
            "seconds_per_question": r(self.seconds),
            "recall": r(self.recall),
            "missing_scores": self.missing,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class AblationReport:
    rows: tuple[ReportRow, ...]
    cap: int = 300
    recall_k: int = 10
    judge: str = PRIMARY

    @property
    def missing(self) -> int:
        return sum(row.missing for row in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cap_words": self.cap,
            "recall_k": self.recall_k,
            "judge": self.judge,
            "missing_scores": self.missing,
            "rows": [row.to_dict() for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        header = (
            "| Profile | Correctness (all) | Correctness (≤{c}w) | Faithfulness (all) "
            "| Faithfulness (≤{c}w) | Recall@{k} | Sec/question |"
        ).format(c=self.cap, k=self.recall_k)
        lines = [header, "|" + "---|" * 7]
        for row in self.rows:
            lines.append(
                f"| {row.profile} | {_fmt(row.correctness)} | {_fmt(row.correctness_capped)} "
                f"| {_fmt(row.faithfulness)} | {_fmt(row.faithfulness_capped)} "
                f"| {_fmt(row.recall)} | {_fmt(row.seconds)} |"
            )
        lines.append("")
        lines.append(f"Missing judge scores excluded from means: {self.missing}")
        failed = sum(row.failed for row in self.rows)
        if failed:
            lines.append(f"Failed questions: {failed}")
        return "\n".join(lines)


def _profile_order(records: Sequence[EvalRecord], profiles: Sequence[str] | None) -> list[str]:
    if profiles:
        return list(profiles)
    seen = list(dict.fromkeys(r.profile for r in records))
    ladder = [p for p in LADDER if p in seen]
    return ladder + [p for p in seen if p not in ladder]


def ablation_report(
    records: Sequence[EvalRecord],
    profiles: Sequence[str] | None = None,
    *,
    cap: int = 300,
    recall_k: int = 10,
    judge_name: str = PRIMARY,
) -> AblationReport:
    """One row per profile: mean judged scores (uncapped and capped), Recall@k and latency.

    Means skip missing scores, folding records in ascending question id.
    Rows follow *profiles*, or the ablation ladder order when not given.
    """
    rows: list[ReportRow] = []
    for profile in _profile_order(records, profiles):
        group = sorted((r for r in records if r.profile == profile), key=lambda r: r.question_id)
        columns: dict[tuple[Metric, bool], list[float | None]] = {
            (metric, capped): [r.score(metric, judge=judge_name, capped=capped) for r in group]
            for metric in Metric
            for capped in (False, True)
        }
        missing = sum(v is None for values in columns.values() for v in values)
        recalls = [recall_at_k(r.retrieved_ids, r.gold_ids, recall_k) for r in group if r.gold_ids]
        rows.append(
            ReportRow(
                profile=profile,
                questions=len(group),
                correctness=_mean(columns[(Metric.CORRECTNESS, False)]),
                correctness_capped=_mean(columns[(Metric.CORRECTNESS, True)]),
                faithfulness=_mean(columns[(Metric.FAITHFULNESS, False)]),
                faithfulness_capped=_mean(columns[(Metric.FAITHFULNESS, True)]),
                seconds=_mean(r.seconds for r in group),
                recall=_mean(recalls),
                missing=missing,
                failed=sum(not r.answer for r in group),
            )
        )
    return AblationReport(rows=tuple(rows), cap=cap, recall_k=recall_k, judge=judge_name)


@dataclass(frozen=True)
class JudgeAgreement:
    metric: Metric
    shared: int
    means: dict[str, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "shared": self.shared,
            "means": {k: None if v is None else round(v, 3) for k, v in self.means.items()},
        }


def judge_agreement(
    records: Sequence[EvalRecord],
    judges: Sequence[str] = (PRIMARY, SECONDARY),
    *,
    capped: bool = False,
) -> list[JudgeAgreement]:
    """Per-metric mean of each judge over the records every judge scored."""
    result: list[JudgeAgreement] = []
    for metric in Metric:
        shared = sorted(
            (r for r in records
             if all(r.score(metric, judge=j, capped=capped) is not None for j in judges)),
            key=lambda r: r.question_id,
        )
        means = {j: _mean(r.score(metric, judge=j, capped=capped) for r in shared) for j in judges}
        result.append(JudgeAgreement(metric=metric, shared=len(shared), means=means))
    return result
