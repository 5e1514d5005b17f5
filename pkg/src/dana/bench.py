"""Benchmark harness: load task suites, run the pipeline per task, score
answers, and report accuracy by level.

Tasks are isolated: each one owns its gateway, sandbox session, and trace
file, so a crash in one never aborts the suite, and ScoreReports are
byte-identical regardless of parallelism or execution order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .answering import (
    KIND_COMMA_LIST,
    KIND_NUMERIC,
    GuidelineSpec,
    parse_guideline,
)
from .belief import UserQuery
from .config import RunConfig
from .errors import DuplicateTask, MalformedRecord, SuiteUnreadable
from .gateway import Cassette, Gateway
from .metadata import MetadataCatalog, SOPChunk, SOPDocument
from .pipeline import run_query
from .sandboxclient import NullSandbox, ScriptedSandbox
from .trace import TraceWriter

log = logging.getLogger(__name__)

NUMERIC_REL_TOLERANCE = 1e-6

LEVELS = ("easy", "hard")


@dataclass
class BenchmarkTask:
    task_id: str
    question: str
    guideline: str | None = None
    level: str | None = None
    expected_answer: str | None = None
    data_refs: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("task question must be non-empty")
        if self.level is not None and self.level not in LEVELS:
            raise ValueError(f"invalid level {self.level!r}")


@dataclass
class TaskResult:
    task_id: str
    produced_answer: str
    match: bool | None
    failure_class: str | None
    wall_ms: int
    iterations_used: int
    trace_ref: str

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "produced_answer": self.produced_answer,
            "match": self.match,
            "failure_class": self.failure_class,
            "wall_ms": self.wall_ms,
            "iterations_used": self.iterations_used,
            "trace_ref": self.trace_ref,
        }


@dataclass
class ScoreReport:
    suite_name: str
    overall_accuracy: float
    per_level: dict[str, float]
    counts: dict[str, int]
    config_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "suite_name": self.suite_name,
            "overall_accuracy": self.overall_accuracy,
            "per_level": self.per_level,
            "counts": self.counts,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json_bytes(self) -> bytes:
        """Canonical serialization; the determinism contract compares these
        bytes across runs and parallelism settings."""
        return (json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n").encode("utf-8")

    def render_table(self) -> str:
        lines = [
            f"suite: {self.suite_name}",
            f"overall accuracy: {self.overall_accuracy:.4f}",
        ]
        for level in sorted(self.per_level):
            lines.append(f"{level} accuracy: {self.per_level[level]:.4f}")
        counts = self.counts
        lines.append(
            "tasks: {total} total, {matched} matched, {failed} failed, "
            "{errored} errored, {unscored} unscored".format(**counts)
        )
        lines.append(f"config fingerprint: {self.config_fingerprint[:16]}")
        return "\n".join(lines)


def load_suite(path: str | Path, *, lenient: bool = False) -> list[BenchmarkTask]:
    """Read a line-delimited suite file: one JSON task record per line.

    Malformed records are fatal unless lenient, in which case they are
    logged with their line number and skipped. Duplicate task ids are
    always fatal.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SuiteUnreadable(f"cannot read suite {path}: {exc}") from exc

    tasks: list[BenchmarkTask] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            task_id = str(record["task_id"])
            if not task_id:
                raise ValueError("empty task_id")
            task = BenchmarkTask(
                task_id=task_id,
                question=str(record["question"]),
                guideline=record.get("guideline"),
                level=record.get("level"),
                expected_answer=(
                    str(record["answer"]) if record.get("answer") is not None else None
                ),
                data_refs=[str(r) for r in record.get("data_refs", [])],
            )
        except (KeyError, ValueError) as exc:
            message = f"malformed suite record at {path}:{lineno}: {exc}"
            if lenient:
                log.warning("%s (skipped)", message)
                continue
            raise MalformedRecord(message) from exc
        if task.task_id in seen:
            raise DuplicateTask(f"duplicate task_id {task.task_id!r} at {path}:{lineno}")
        seen.add(task.task_id)
        tasks.append(task)
    return tasks


def _normalize_list(text: str) -> list[str]:
    return [part.strip().casefold() for part in text.split(",") if part.strip()]


def _numbers_match(produced: str, expected: str, decimals: int | None) -> bool | None:
    try:
        a = float(produced.strip())
        b = float(expected.strip())
    except (TypeError, ValueError):
        return None
    if decimals is not None and round(a, decimals) == round(b, decimals):
        return True
    return abs(a - b) <= NUMERIC_REL_TOLERANCE * max(1.0, abs(a), abs(b))


def score_answer(
    produced: str,
    expected: str,
    spec: GuidelineSpec,
    *,
    ordered: bool = False,
) -> bool:
    """Accuracy-by-question match under the task's answer contract.

    comma_list compares trimmed, case-folded elements as a multiset
    (sequence with --ordered); numeric kinds compare within a 1e-6
    relative tolerance; everything else is trimmed case-insensitive
    string equality.
    """
    if spec.kind == KIND_COMMA_LIST:
        left, right = _normalize_list(produced), _normalize_list(expected)
        if ordered:
            return left == right
        return sorted(left) == sorted(right)
    if spec.kind == KIND_NUMERIC:
        numeric = _numbers_match(produced, expected, spec.decimals)
        if numeric is not None:
            return numeric
    return produced.strip().casefold() == expected.strip().casefold()


def config_fingerprint(config: RunConfig, catalog: MetadataCatalog, suite_name: str, ordered: bool) -> str:
    """Hash of everything that should change a report: model, limits,
    scoring flags, suite identity, and catalog content. Parallelism and
    output paths deliberately excluded."""
    payload = {
        "model_id": config.model_id,
        "limits": config.limits.to_dict(),
        "digest_budget": config.digest_budget,
        "ordered": ordered,
        "suite_name": suite_name,
        "catalog": catalog.fingerprint(),
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _sop_override_catalog(catalog: MetadataCatalog, override_path: str | Path) -> MetadataCatalog:
    """Swap in a per-suite SOP document (task definitions supplied as SOP
    input) without touching the catalog on disk."""
    body = Path(override_path).read_text(encoding="utf-8")
    doc = SOPDocument(
        doc_id="suite-sop-override",
        title="Suite SOP override",
        chunks=[SOPChunk(chunk_id="suite-sop-override#0", text=body, char_span=(0, len(body)))],
    )
    return replace(catalog, sops=list(catalog.sops) + [doc])


def _run_single_task(
    task: BenchmarkTask,
    catalog: MetadataCatalog,
    config: RunConfig,
    cassette_dir: Path | None,
    shared_cassette: Cassette | None,
    out_dir: Path,
    suite_name: str,
    ordered: bool,
) -> TaskResult:
    started = time.monotonic()
    run_id = f"bench-{suite_name}-{task.task_id}"
    trace_path = out_dir / "traces" / f"{task.task_id}.trace.jsonl"
    produced = ""
    failure: str | None = None
    iterations = 0

    try:
        cassette_file = ""
        if shared_cassette is not None:
            cassette = shared_cassette
        elif cassette_dir is not None:
            cassette_file = str(cassette_dir / f"{task.task_id}.chat.jsonl")
            cassette = Cassette(cassette_file, mode=config.cassette_mode)
        else:
            cassette = None
        gateway = Gateway(cassette=cassette)

        sandbox_script = None
        if cassette_dir is not None:
            candidate = cassette_dir / f"{task.task_id}.sandbox.jsonl"
            if candidate.exists():
                sandbox_script = candidate
        sandbox = ScriptedSandbox.from_file(sandbox_script) if sandbox_script else NullSandbox()

        task_config = replace(config, cassette_path=cassette_file, sandbox_script=str(sandbox_script or ""))
        trace = TraceWriter(trace_path, run_id=run_id)
        query = UserQuery(text=task.question, guideline=task.guideline)
        run = run_query(query, catalog, task_config, gateway, sandbox, trace)
        produced = run.response.answer_text
        iterations = run.context.iteration
        if run.context.final_status == "failed":
            failure = run.context.failure_reason or "RunFailed"
    except Exception as exc:  # task isolation: a crash is a result, not an abort
        log.warning("task %s errored: %s", task.task_id, exc)
        return TaskResult(
            task_id=task.task_id,
            produced_answer="",
            match=False if task.expected_answer is not None else None,
            failure_class=type(exc).__name__,
            wall_ms=int((time.monotonic() - started) * 1000),
            iterations_used=iterations,
            trace_ref=str(trace_path),
        )

    match: bool | None = None
    if task.expected_answer is not None:
        spec = parse_guideline(task.guideline)
        match = score_answer(produced, task.expected_answer, spec, ordered=ordered)
    return TaskResult(
        task_id=task.task_id,
        produced_answer=produced,
        match=match,
        failure_class=failure,
        wall_ms=int((time.monotonic() - started) * 1000),
        iterations_used=iterations,
        trace_ref=str(trace_path),
    )


def _accuracy(results: list[TaskResult]) -> float:
    if not results:
        return 0.0
    matched = sum(1 for r in results if r.match is True)
    return round(matched / len(results), 6)


def build_report(
    suite_name: str,
    tasks: list[BenchmarkTask],
    results: list[TaskResult],
    fingerprint: str,
) -> ScoreReport:
    by_id = {t.task_id: t for t in tasks}
    ordered_results = sorted(results, key=lambda r: r.task_id)

    per_level: dict[str, float] = {}
    for level in LEVELS:
        stratum = [r for r in ordered_results if by_id[r.task_id].level == level]
        if stratum:
            per_level[level] = _accuracy(stratum)

    errored = sum(1 for r in ordered_results if r.failure_class and r.match is not True)
    matched = sum(1 for r in ordered_results if r.match is True)
    unscored = sum(1 for r in ordered_results if r.match is None and not r.failure_class)
    failed = len(ordered_results) - matched - errored - unscored

    return ScoreReport(
        suite_name=suite_name,
        overall_accuracy=_accuracy(ordered_results),
        per_level=per_level,
        counts={
            "total": len(ordered_results),
            "matched": matched,
            "failed": failed,
            "errored": errored,
            "unscored": unscored,
        },
        config_fingerprint=fingerprint,
    )


def run_suite(
    suite_path: str | Path,
    catalog: MetadataCatalog,
    config: RunConfig,
    *,
    parallelism: int = 1,
    cassette_path: str | Path | None = None,
    out_dir: str | Path = "bench-out",
    lenient: bool = False,
    ordered: bool = False,
    sop_override: str | Path | None = None,
) -> tuple[ScoreReport, list[TaskResult]]:
    """Run every task through the full pipeline and score the answers.

    Writes traces, a per-task results file, and both report forms under
    out_dir. cassette_path may be a directory holding per-task
    ``<task_id>.chat.jsonl`` / ``<task_id>.sandbox.jsonl`` files or a
    single shared cassette file.
    """
    suite_path = Path(suite_path)
    suite_name = suite_path.stem
    tasks = load_suite(suite_path, lenient=lenient)
    if sop_override is not None:
        catalog = _sop_override_catalog(catalog, sop_override)

    out_dir = Path(out_dir)
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)

    cassette_dir: Path | None = None
    shared_cassette: Cassette | None = None
    if cassette_path is not None:
        cassette_path = Path(cassette_path)
        if cassette_path.is_dir():
            cassette_dir = cassette_path
        else:
            shared_cassette = Cassette(cassette_path, mode=config.cassette_mode)

    def _one(task: BenchmarkTask) -> TaskResult:
        return _run_single_task(
            task, catalog, config, cassette_dir, shared_cassette, out_dir, suite_name, ordered
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_one, tasks))
    else:
        results = [_one(task) for task in tasks]

    results.sort(key=lambda r: r.task_id)
    fingerprint = config_fingerprint(config, catalog, suite_name, ordered)
    report = build_report(suite_name, tasks, results, fingerprint)

    results_path = out_dir / "results.jsonl"
    with results_path.open("w", encoding="utf-8") as handle:
        for result in results:
            handle.write(json.dumps(result.to_dict(), ensure_ascii=False) + "\n")
    (out_dir / "report.json").write_bytes(report.to_json_bytes())
    (out_dir / "report.txt").write_text(report.render_table() + "\n", encoding="utf-8")
    return report, results
