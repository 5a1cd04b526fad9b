"""Command-line interface: ``cascade-rag <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 backend or pipeline-stage error.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Sequence, cast

from .benchgen import DEFAULT_TARGET, allocate, ingest_tagged, sample, stratum_counts
from .clients.base import ChatClient
from .clients.factory import build_chat, build_embedder, retry_policy
from .config import PipelineConfig, load_config, validate_config
from .evaluation import (
    PRIMARY,
    SECONDARY,
    ablation_report,
    build_records,
    judge_agreement,
    score_records,
)
from .exceptions import BackendError, ConfigError, DataError, StageError
from .indexing import build_index, open_index
from .jsonl import read_jsonl, write_jsonl
from .models.benchmark import BenchmarkItem
from .models.judge import EvalRecord
from .models.passage import Passage
from .models.trace import AnswerTrace
from .pipeline import DEFAULT_PROFILE, LADDER, PROFILES, Pipeline
from .service import serve
from .store.corpus import ingest_corpus, load_corpus, namespace_counts, save_corpus
from .store.local import LocalIndex

logger = logging.getLogger("cascade_rag")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------

def _config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config, args.overrides)
    return validate_config(config).raise_for_errors()


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be positive")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} must be >= 0")
    return value


def _passage_store(config: PipelineConfig) -> dict[str, Passage]:
    path = Path(config.corpus_path)
    if not path.exists():
        raise DataError(f"passage store {path} not found; run ingest first")
    return load_corpus(path, config.namespace_set)


def _slug(profile: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", profile.lower()).strip("-") or "profile"


def _read_items(path: str) -> list[BenchmarkItem]:
    return [BenchmarkItem.from_dict(record) for _, record in read_jsonl(path)]


def _read_questions(path: str) -> list[tuple[str, str]]:
    questions: list[tuple[str, str]] = []
    for line_no, record in read_jsonl(path):
        qid = str(record.get("question_id") or record.get("id") or "").strip()
        text = str(record.get("question", "")).strip()
        if not qid or not text:
            raise DataError(f"{path}: record needs question_id and question", line=line_no)
        questions.append((qid, text))
    return questions


def _judges(config: PipelineConfig, secondary: bool) -> dict[str, ChatClient]:
    retry = retry_policy(config)
    judges = {PRIMARY: build_chat(config.backends["judge"], retry)}
    backend = config.backend("judge_secondary")
    if secondary:
        if backend is None:
            raise ConfigError("backends.judge_secondary is not configured")
        judges[SECONDARY] = build_chat(backend, retry)
    return judges


def _failures(traces: Sequence[AnswerTrace]) -> int:
    failed = [t for t in traces if not t.ok]
    for t in failed:
        logger.warning("question %s failed at %s: %s", t.question_id, t.error_stage, t.error)
    return len(failed)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    config = _config(args)
    passages = ingest_corpus(args.corpus, config.namespace_set, args.tags)
    out = args.out or config.corpus_path
    save_corpus(out, passages)
    for label, count in namespace_counts(passages).items():
        print(f"{label.name}\t{count}")
    print(f"{len(passages)} passages written to {out}")
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    config = _config(args)
    passages = list(load_corpus(args.corpus or config.corpus_path, config.namespace_set).values())
    retry = retry_policy(config)
    if args.baseline:
        backend = config.backend("baseline_embedder")
        if backend is None or not config.baseline_index_path:
            raise ConfigError("--baseline needs backends.baseline_embedder and index.baseline_path")
        embedder = build_embedder(backend, retry)
        out = args.out or config.baseline_index_path
    else:
        embedder = build_embedder(config.backends["embedder"], retry)
        out = args.out or config.index_path

    remote = config.backend("index")
    if remote is not None and not remote.is_mock and not args.baseline:
        store = build_index(passages, embedder, config.namespace_set,
                            batch_size=config.embed_batch_size,
                            store=open_index(config, retry=retry))
        print(f"upserted {len(passages)} passages to {remote.endpoint}")
        return EXIT_OK
    store = build_index(
        passages, embedder, config.namespace_set, batch_size=config.embed_batch_size
    )
    store = cast(LocalIndex, store)
    store.save(out)
    print(f"indexed {len(store)} passages (dimension {store.dimension}) into {out}")
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    config = _config(args)
    pipeline = Pipeline.from_config(config)
    try:
        trace = pipeline.run_query(args.question, args.profile)
    except StageError as exc:
        if args.trace:
            write_jsonl(args.trace, [exc.trace.to_dict()])
        raise
    if args.trace:
        write_jsonl(args.trace, [trace.to_dict()])
    print(trace.answer)
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    config = _config(args)
    questions = _read_questions(args.questions)
    pipeline = Pipeline.from_config(config)
    traces = pipeline.run_batch(questions, args.profile, concurrency=args.concurrency)
    write_jsonl(args.out, (t.to_dict() for t in traces))
    failed = _failures(traces)
    print(f"{len(traces) - failed}/{len(traces)} questions answered; traces in {args.out}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    profiles = [p.strip() for p in ",".join(args.profiles).split(",") if p.strip()]
    if not profiles:
        args.parser.error("--profiles must name at least one profile")
    unknown = [p for p in profiles if p not in PROFILES]
    if unknown:
        args.parser.error(f"unknown profile(s): {', '.join(unknown)}")
    config = _config(args)
    items = _read_items(args.benchmark)
    if not items:
        raise DataError(f"{args.benchmark}: no benchmark questions")
    passages = _passage_store(config)
    pipeline = Pipeline.from_config(config)
    judges = _judges(config, args.secondary_judge)

    out_dir = Path(args.out_dir)
    records: list[EvalRecord] = []
    failed = 0
    for profile in profiles:
        traces = pipeline.run_batch(
            [(i.question_id, i.question) for i in items], profile, concurrency=args.concurrency
        )
        write_jsonl(out_dir / f"traces-{_slug(profile)}.jsonl", (t.to_dict() for t in traces))
        failed += _failures(traces)
        records.extend(build_records(traces, items, passages))

    cap = args.cap_words or config.word_cap
    score_records(records, judges, config, cap=cap)
    write_jsonl(out_dir / "eval.jsonl", (r.to_dict() for r in records))
    report = ablation_report(records, profiles, cap=cap, recall_k=config.recall_k)
    (out_dir / "report.md").write_text(report.to_markdown() + "\n", encoding="utf-8")
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_markdown())
    if failed:
        print(f"{failed} question runs failed")
    return EXIT_OK


def cmd_bench_sample(args: argparse.Namespace) -> int:
    _config(args)
    result = ingest_tagged(args.qa, args.tags)
    if result.rejected:
        logger.warning("%d Q&A records rejected", len(result.rejected))
        print(result.report(), file=sys.stderr)
    allocation = allocate(stratum_counts(result.items), args.target)
    benchmark = sample(result.items, allocation, args.seed)
    write_jsonl(args.out, (item.to_dict() for item in benchmark))
    filled = sum(1 for a in allocation.values() if a.allocated)
    print(f"sampled {len(benchmark)} questions from {len(result.items)} candidates "
          f"across {filled} strata into {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config(args)
    traces = [AnswerTrace.from_dict(record) for _, record in read_jsonl(args.traces)]
    items = _read_items(args.benchmark)
    passages = _passage_store(config)
    records = build_records(traces, items, passages)
    score_records(records, _judges(config, args.secondary_judge), config,
                  cap=args.cap_words, concurrency=args.concurrency)
    write_jsonl(args.out, (r.to_dict() for r in records))
    missing = sum(s.missing for r in records for s in r.scores)
    print(f"judged {len(records)} answers ({missing} missing scores) into {args.out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    config = _config(args)
    cap = args.cap_words or config.word_cap
    recall_k = args.recall_k or config.recall_k
    records = [EvalRecord.from_dict(record) for _, record in read_jsonl(args.records)]
    profiles = [p.strip() for p in ",".join(args.profiles or []).split(",") if p.strip()] or None
    report = ablation_report(records, profiles, cap=cap, recall_k=recall_k)
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_markdown())
    if args.agreement:
        print()
        print("| Metric | Shared | " + " | ".join(args.agreement_judges) + " |")
        print("|---|---|" + "---|" * len(args.agreement_judges))
        for row in judge_agreement(records, args.agreement_judges):
            means = " | ".join(
                "n/a" if row.means[j] is None else f"{row.means[j]:.3f}"
                for j in args.agreement_judges
            )
            print(f"| {row.metric.value} | {row.shared} | {means} |")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.host:
        config = config.with_overrides(service_host=args.host)
    if args.port:
        config = config.with_overrides(service_port=args.port)
    serve(Pipeline.from_config(config))
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults apply when omitted)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="PATH=VALUE",
                        help="override a config field, e.g. retrieval.dense_k=50")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="warnings and errors only")

    parser = _Parser(prog="cascade-rag", description="Routed hybrid-retrieval RAG pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", parents=[common], help="validate a corpus into the passage store")
    p.add_argument("--corpus", required=True, help="raw corpus JSONL")
    p.add_argument("--tags", help="topic/format tag JSONL joined by passage id")
    p.add_argument("--out", help="passage store path (default corpus.path)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", parents=[common], help="embed the passage store into an index")
    p.add_argument("--corpus", help="passage store path (default corpus.path)")
    p.add_argument("--out", help="index directory (default index.path)")
    p.add_argument("--baseline", action="store_true",
                   help="build the Baseline index with backends.baseline_embedder")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", parents=[common], help="answer one question")
    p.add_argument("question")
    p.add_argument("--profile", choices=list(PROFILES), default=DEFAULT_PROFILE)
    p.add_argument("--trace", help="write the answer trace to this JSONL file")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("batch", parents=[common], help="answer a file of questions")
    p.add_argument("--questions", required=True, help="JSONL with question_id and question")
    p.add_argument("--profile", choices=list(PROFILES), default=DEFAULT_PROFILE)
    p.add_argument("--out", required=True, help="trace JSONL output")
    p.add_argument("--concurrency", type=_positive_int,
                   help="in-flight queries (default batch.concurrency)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("ablate", parents=[common], help="run profiles over a benchmark and report")
    p.add_argument("--benchmark", required=True, help="benchmark JSONL from bench-sample")
    p.add_argument("--profiles", nargs="+", default=[",".join(LADDER)],
                   help="profiles to run, comma or space separated (default: the full ladder)")
    p.add_argument("--out-dir", required=True, help="directory for traces, eval records and report")
    p.add_argument("--concurrency", type=_positive_int)
    p.add_argument("--cap-words", type=_positive_int, help="word cap (default evaluation.word_cap)")
    p.add_argument("--secondary-judge", action="store_true", help="also score with judge_secondary")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench-sample", parents=[common], help="draw a stratified benchmark")
    p.add_argument("--qa", required=True, help="Q&A JSONL")
    p.add_argument("--tags", required=True, help="document tag JSONL")
    p.add_argument("--target", type=_positive_int, default=DEFAULT_TARGET)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_sample)

    p = sub.add_parser("evaluate", parents=[common], help="judge a trace file")
    p.add_argument("--traces", required=True)
    p.add_argument("--benchmark", required=True)
    p.add_argument("--out", required=True, help="evaluation record JSONL")
    p.add_argument("--cap-words", type=_positive_int, help="word cap (default evaluation.word_cap)")
    p.add_argument("--concurrency", type=_positive_int, help="in-flight judge calls")
    p.add_argument("--secondary-judge", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="ablation table from evaluation records")
    p.add_argument("--records", required=True)
    p.add_argument("--profiles", nargs="+", help="row order (default: ladder order)")
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("--cap-words", type=_positive_int,
                   help="word cap (default evaluation.word_cap)")
    p.add_argument("--recall-k", type=_positive_int,
                   help="k for Recall@k (default evaluation.recall_k)")
    p.add_argument("--agreement", action="store_true", help="add the judge agreement table")
    p.add_argument("--agreement-judges", nargs=2, default=[PRIMARY, SECONDARY],
                   metavar=("JUDGE", "JUDGE"))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", parents=[common], help="serve /health and /query over HTTP")
    p.add_argument("--host")
    p.add_argument("--port", type=_positive_int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except ConfigError as exc:
        for error in exc.errors:
            print(f"config error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_BACKEND
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
