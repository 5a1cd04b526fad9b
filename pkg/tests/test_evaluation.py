"""Tests for the word cap, judging, Recall@k, the ablation report and judge agreement."""
import json
import random

import pytest

from cascade_rag.clients import MockChatClient, ScriptedChatClient, UnavailableBackend
from cascade_rag.config import PipelineConfig
from cascade_rag.evaluation import (
    PRIMARY,
    SECONDARY,
    ablation_report,
    apply_word_cap,
    build_records,
    judge,
    judge_agreement,
    parse_verdict,
    recall_at_k,
    score_records,
)
from cascade_rag.models import AnswerTrace, EvalRecord, JudgeScore, Metric, NamespaceLabel, Passage
from cascade_rag.models.benchmark import BenchmarkItem
from cascade_rag.models.enums import PromptKind


def _record(qid="1", answer="the answer", profile="+Rewrite", **kwargs):
    defaults = dict(question="q?", gold_answer="gold", gold_ids=["a"], retrieved_ids=["a"],
                    retrieved_passages=["passage"])
    defaults.update(kwargs)
    return EvalRecord(question_id=qid, answer=answer, profile=profile, **defaults)


def _scored(qid, profile, correctness, faithfulness, judge_name=PRIMARY, seconds=1.0, **kwargs):
    record = _record(qid, profile=profile, seconds=seconds, **kwargs)
    for capped in (False, True):
        record.scores.append(JudgeScore(Metric.CORRECTNESS, correctness, judge=judge_name,
                                        capped=capped))
        record.scores.append(JudgeScore(Metric.FAITHFULNESS, faithfulness, judge=judge_name,
                                        capped=capped))
    return record


class TestWordCap:
    def test_under_cap_is_unchanged(self):
        answer = "one  two\tthree four five six seven eight nine ten"
        assert apply_word_cap(answer, 300) == answer

    def test_over_cap(self):
        answer = " ".join(f"w{i}" for i in range(350))
        capped = apply_word_cap(answer, 300)
        assert len(capped.split()) == 300
        assert capped.split() == answer.split()[:300]

    def test_cap_one(self):
        assert apply_word_cap("first\n second third", 1) == "first"

    def test_invalid_cap(self):
        with pytest.raises(ValueError):
            apply_word_cap("text", 0)

    def test_random_answers(self):
        rng = random.Random(8)
        pieces = ["a", "bb", " ", "\n", "\t", "ccc", "  "]
        for _ in range(2000):
            answer = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 80)))
            cap = rng.randint(1, 20)
            capped = apply_word_cap(answer, cap)
            assert len(capped.split()) <= cap
            assert apply_word_cap(capped, cap) == capped
            assert capped.split() == answer.split()[:cap]


class TestParseVerdict:
    def test_last_score_line_wins(self):
        assert parse_verdict("SCORE: 1\nthinking...\nSCORE: -0.5") == -0.5

    def test_decimal_forms(self):
        assert parse_verdict("Reasoning.\nSCORE: .75") == 0.75
        assert parse_verdict("SCORE:2.") == 2.0

    def test_no_verdict(self):
        assert parse_verdict("I would give it a 2.") is None
        assert parse_verdict("SCORE: high") is None


class TestJudge:
    def test_scripted_value_passes_through(self):
        score = judge(_record(), Metric.CORRECTNESS, ScriptedChatClient(default="ok\nSCORE: 1.25"),
                      capped=False)
        assert score.value == 1.25 and not score.clamped and score.judge == PRIMARY

    def test_out_of_range_is_clamped(self):
        client = ScriptedChatClient(default="SCORE: 2.5")
        score = judge(_record(), Metric.CORRECTNESS, client, capped=False)
        assert score.value == 2.0 and score.clamped
        low = judge(_record(), Metric.FAITHFULNESS, ScriptedChatClient(default="SCORE: -3"), False)
        assert low.value == -1.0 and low.clamped

    def test_reask_then_verdict(self):
        client = ScriptedChatClient(replies=["I think it is fine.", "SCORE: 0.5"])
        assert judge(_record(), Metric.FAITHFULNESS, client, capped=False).value == 0.5

    def test_missing_after_reasks(self):
        calls = []

        class Vague:
            def complete(self, request):
                calls.append(request)
                return "pretty good"

        score = judge(_record(), Metric.CORRECTNESS, Vague(), capped=False, reasks=2)
        assert score.missing
        assert len(calls) == 3
        assert "SCORE: <number>" in calls[1].user_content

    def test_prompt_states_only_the_scale_endpoints(self):
        seen = {}

        class Recorder:
            def complete(self, request):
                seen[request.kind] = request.user_content
                return "SCORE: 0"

        judge(_record(), Metric.CORRECTNESS, Recorder(), capped=False)
        correctness = seen.pop(PromptKind.JUDGE)
        judge(_record(), Metric.FAITHFULNESS, Recorder(), capped=False)
        faithfulness = seen.pop(PromptKind.JUDGE)

        assert "-1 indicates an incorrect answer." in correctness
        assert "2 represents a fully correct and relevant response" in correctness
        assert "-1 indicates no grounding at all." in faithfulness
        assert "1 means the entire answer is fully supported by retrieved content." in faithfulness
        for text in (correctness, faithfulness):
            scale = [line for line in text.splitlines() if line[:2].strip().lstrip("-").isdigit()]
            assert len(scale) == 2
            assert not any(line.lstrip().startswith(("0 ", "0.5", "1.5")) for line in scale)

    def test_backend_failure_is_missing(self):
        score = judge(_record(), Metric.CORRECTNESS, UnavailableBackend(), capped=True)
        assert score.missing and score.capped

    def test_capped_answer_is_sent(self):
        seen = []

        class Recorder:
            def complete(self, request):
                seen.append(request.user_content)
                return "SCORE: 1"

        answer = " ".join(f"w{i}" for i in range(400))
        judge(_record(answer=answer), Metric.CORRECTNESS, Recorder(), capped=True, cap=300)
        assert "w299" in seen[0] and "w300" not in seen[0]

    def test_late_grounding_scores_lower_when_capped(self):
        filler = " ".join(f"intro{i}" for i in range(300))
        record = _record(answer=filler + " the bond market rallied today",
                         retrieved_passages=["Yesterday the bond market rallied today again."])
        client = MockChatClient()
        uncapped = judge(record, Metric.FAITHFULNESS, client, capped=False)
        capped = judge(record, Metric.FAITHFULNESS, client, capped=True)
        assert capped.value <= uncapped.value
        assert capped.value == -1.0


class TestRecallAtK:
    def test_full_hit(self):
        assert recall_at_k(["x", "a", "b"], {"a", "b"}, 10) == 1.0

    def test_boundary(self):
        retrieved = [f"n{i}" for i in range(10)] + ["b"]
        assert recall_at_k(["a"] + retrieved, {"a", "b"}, 10) == 0.5

    def test_errors(self):
        with pytest.raises(ValueError):
            recall_at_k(["a"], set(), 10)
        with pytest.raises(ValueError):
            recall_at_k(["a"], {"a"}, 0)

    def test_brute_force_and_monotone(self):
        rng = random.Random(12)
        pool = [f"d{i}" for i in range(30)]
        for _ in range(500):
            retrieved = rng.sample(pool, rng.randint(0, 20))
            gold = set(rng.sample(pool, rng.randint(1, 2)))
            values = []
            for k in range(1, 22):
                expected = sum(1 for g in gold if g in retrieved[:k]) / len(gold)
                value = recall_at_k(retrieved, gold, k)
                assert value == expected
                values.append(value)
            assert values == sorted(values)


class TestBuildRecords:
    def test_joins_by_question_id(self):
        items = [BenchmarkItem("q1", "what?", "gold", "Causal", ("p1",), "Games", "News")]
        traces = [
            AnswerTrace("what?", "+Rerank", question_id="q1", answer="ans",
                        stage_ids={"dense": ["p2", "p1"], "rerank": ["p1"]}, total_seconds=2.0),
            AnswerTrace("other", "+Rerank", question_id="zz", answer="x"),
        ]
        passages = {"p1": Passage("p1", "text one", NamespaceLabel("Games"))}
        (record,) = build_records(traces, items, passages)
        assert record.retrieved_ids == ["p1"]
        assert record.retrieved_passages == ["text one"]
        assert record.gold_ids == ["p1"]
        assert record.seconds == 2.0 and record.profile == "+Rerank"

    def test_failed_trace_has_empty_answer(self):
        items = [BenchmarkItem("q1", "what?", "gold", "Causal", ("p1",), "Games", "News")]
        trace = AnswerTrace("what?", "+Rerank", question_id="q1", error="boom")
        (record,) = build_records([trace], items)
        assert record.answer == ""


class TestScoreRecords:
    def test_every_metric_cap_and_judge(self):
        records = [_record("1"), _record("2", answer="")]
        judges = {PRIMARY: ScriptedChatClient(default="SCORE: 1"),
                  SECONDARY: ScriptedChatClient(default="SCORE: 0.5")}
        score_records(records, judges, PipelineConfig(), concurrency=3)
        assert len(records[0].scores) == 8
        assert records[1].scores == []
        assert records[0].score(Metric.FAITHFULNESS, judge=SECONDARY, capped=True) == 0.5
        assert records[0].score(Metric.CORRECTNESS, capped=False) == 1.0


class TestAblationReport:
    def test_singleton_means(self):
        report = ablation_report([_scored("1", "+Rewrite", 2.0, 1.0)])
        (row,) = report.rows
        assert (row.correctness, row.faithfulness) == (2.0, 1.0)
        assert (row.correctness_capped, row.faithfulness_capped) == (2.0, 1.0)
        row = "| +Rewrite | 2.000 | 2.000 | 1.000 | 1.000 | 1.000 | 1.000 |"
        assert row in report.to_markdown()

    def test_hand_computed_means(self):
        values = [(2, 1), (1, 0.5), (0, 0), (-1, -1), (1.5, 0.5),
                  (2, 1), (0.5, 0), (1, 1), (-0.5, -0.5), (1.5, 0.5)]
        records = [_scored(str(i), "+Rerank", c, f, seconds=i) for i, (c, f) in enumerate(values)]
        (row,) = ablation_report(records).rows
        assert row.correctness == pytest.approx(0.8)
        assert row.faithfulness == pytest.approx(0.3)
        assert row.seconds == pytest.approx(4.5)
        assert row.questions == 10 and row.missing == 0

    def test_missing_scores_excluded_and_counted(self):
        records = [_scored("1", "+Rewrite", 2.0, 1.0), _scored("2", "+Rewrite", None, 0.0)]
        report = ablation_report(records)
        (row,) = report.rows
        assert row.correctness == 2.0
        assert row.faithfulness == 0.5
        assert report.missing == 2
        assert "Missing judge scores excluded from means: 2" in report.to_markdown()

    def test_ladder_row_order(self):
        records = [_scored(str(i), p, 1.0, 1.0)
                   for i, p in enumerate(["+Rewrite", "+Routing", "Baseline", "+Rerank", "custom"])]
        report = ablation_report(records)
        assert [row.profile for row in report.rows] == [
            "Baseline", "+Routing", "+Rerank", "+Rewrite", "custom"]
        explicit = ablation_report(records, ["+Rerank", "Baseline"])
        assert [row.profile for row in explicit.rows] == ["+Rerank", "Baseline"]

    def test_recall_and_failed(self):
        records = [
            _scored("1", "+Rerank", 1.0, 1.0, gold_ids=["a", "b"], retrieved_ids=["a", "x"]),
            _scored("2", "+Rerank", 1.0, 1.0, gold_ids=["c"], retrieved_ids=["c"]),
        ]
        records.append(_record("3", answer="", profile="+Rerank", gold_ids=["z"],
                               retrieved_ids=[]))
        report = ablation_report(records)
        (row,) = report.rows
        assert row.recall == pytest.approx(0.5)
        assert row.failed == 1
        assert "Failed questions: 1" in report.to_markdown()

    def test_pure_function_of_records(self):
        records = [_scored(str(i), "+Rewrite", i / 10, 0.1) for i in range(5)]
        first = ablation_report(records).to_json()
        assert ablation_report(list(reversed(records))).to_json() == first
        assert json.loads(first)["rows"][0]["correctness"] == 0.2

    def test_header_uses_cap(self):
        header = ablation_report([], cap=150).to_markdown().splitlines()[0]
        assert "Correctness (≤150w)" in header


class TestJudgeAgreement:
    def _dual(self, shift):
        records = []
        for i, (c, f) in enumerate([(1.0, 0.2), (1.5, 0.4), (2.0, 0.6)]):
            record = _scored(str(i), "+Rewrite", c, f)
            for capped in (False, True):
                record.scores.append(JudgeScore(Metric.CORRECTNESS, c + shift, judge=SECONDARY,
                                                capped=capped))
                record.scores.append(JudgeScore(Metric.FAITHFULNESS, f + shift, judge=SECONDARY,
                                                capped=capped))
            records.append(record)
        return records

    def test_identical_judges(self):
        for row in judge_agreement(self._dual(0.0)):
            assert row.means[PRIMARY] == pytest.approx(row.means[SECONDARY])
            assert row.shared == 3

    def test_shifted_judge(self):
        correctness, faithfulness = judge_agreement(self._dual(0.1))
        assert correctness.metric is Metric.CORRECTNESS
        assert correctness.means[PRIMARY] == pytest.approx(1.5)
        assert correctness.means[SECONDARY] - correctness.means[PRIMARY] == pytest.approx(0.1)
        assert faithfulness.means[PRIMARY] == pytest.approx(0.4)
        assert faithfulness.means[SECONDARY] == pytest.approx(0.5)

    def test_only_shared_records_count(self):
        records = self._dual(0.0)
        records.append(_scored("9", "+Rewrite", -1.0, -1.0))
        correctness, _ = judge_agreement(records)
        assert correctness.shared == 3
        assert correctness.means[PRIMARY] == pytest.approx(1.5)
