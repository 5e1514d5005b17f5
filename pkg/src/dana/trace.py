"""Append-only audit log of pipeline runs.

One file per run, one JSON event per line, prompts stored in full so a
trace is self-contained: it can be validated offline and re-driven as a
cassette.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import IoFailure, RunNotFound, SequenceGap

STAGES = ("metadata", "goal", "grounding", "scaffold", "executor_iteration", "finalize")
_STAGE_RANK = {name: rank for rank, name in enumerate(STAGES)}

# Stages that may appear at most once per run; finalize must appear exactly once.
_SINGLETON_STAGES = ("metadata", "goal", "grounding", "scaffold", "finalize")


@dataclass
class TraceEvent:
    run_id: str
    seq: int
    stage: str
    payload: dict = field(default_factory=dict)
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "seq": self.seq,
            "stage": self.stage,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceEvent":
        return cls(
            run_id=data["run_id"],
            seq=int(data["seq"]),
            stage=data["stage"],
            payload=data.get("payload", {}),
            timestamp=data.get("timestamp", ""),
        )


class TraceWriter:
    """Single-writer, durable appender for one run's events."""

    def __init__(self, path: str | Path, run_id: str):
        self.path = Path(path)
        self.run_id = run_id
        self._next_seq = 0
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        # A writer owns a fresh file; appending to someone else's run is
        # not a supported operation.
        self.path.write_text("", encoding="utf-8")

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append(self, event: TraceEvent) -> None:
        with self._lock:
            if event.run_id != self.run_id:
                raise ValueError(f"event run_id {event.run_id!r} does not match {self.run_id!r}")
            if event.seq != self._next_seq:
                raise SequenceGap(f"expected seq {self._next_seq}, got {event.seq}")
            if event.stage not in STAGES:
                raise ValueError(f"unknown stage {event.stage!r}")
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(event.to_dict(), ensure_ascii=False, default=str) + "\n")
                    handle.flush()
            except OSError as exc:
                raise IoFailure(f"cannot append trace event: {exc}") from exc
            self._next_seq += 1

    def emit(self, stage: str, payload: dict) -> TraceEvent:
        """Build and append the next event in sequence."""
        event = TraceEvent(
            run_id=self.run_id,
            seq=self._next_seq,
            stage=stage,
            payload=payload,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        self.append(event)
        return event


def read_trace(path: str | Path) -> list[TraceEvent]:
    path = Path(path)
    if not path.exists():
        raise RunNotFound(f"trace file not found: {path}")
    events = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(TraceEvent.from_dict(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise IoFailure(f"bad trace line {path}:{lineno}: {exc}") from exc
    return events


def validate_events(events: list[TraceEvent]) -> list[dict]:
    """Machine-check the staged-workflow invariants.

    Returns one violation record per breach: sequence gaps, stage-order
    inversions, duplicate singleton stages, a missing or repeated
    finalize, non-monotonic executor iterations, and mixed run ids.
    """
    violations: list[dict] = []

    def flag(kind: str, seq: int, detail: str) -> None:
        violations.append({"kind": kind, "seq": seq, "detail": detail})

    if not events:
        flag("Cardinality", -1, "empty trace: no events at all")
        return violations

    run_id = events[0].run_id
    highest_rank = -1
    last_iteration = 0
    stage_counts = {name: 0 for name in STAGES}

    for position, event in enumerate(events):
        if event.run_id != run_id:
            flag("RunIdMismatch", event.seq, f"run_id {event.run_id!r} != {run_id!r}")
        if event.seq != position:
            flag("SequenceGap", event.seq, f"expected seq {position}, found {event.seq}")
        if event.stage not in _STAGE_RANK:
            flag("UnknownStage", event.seq, f"stage {event.stage!r}")
            continue
        stage_counts[event.stage] += 1

        rank = _STAGE_RANK[event.stage]
        if rank < highest_rank:
            flag(
                "StageOrder",
                event.seq,
                f"stage {event.stage!r} after {STAGES[highest_rank]!r}",
            )
        highest_rank = max(highest_rank, rank)

        if event.stage == "executor_iteration":
            iteration = event.payload.get("iteration")
            if not isinstance(iteration, int) or iteration != last_iteration + 1:
                flag(
                    "IterationOrder",
                    event.seq,
                    f"iteration {iteration!r} after {last_iteration}",
                )
            if isinstance(iteration, int):
                last_iteration = max(last_iteration, iteration)

    for stage in _SINGLETON_STAGES:
        if stage_counts[stage] > 1:
            flag("Cardinality", -1, f"{stage_counts[stage]} {stage!r} events, at most 1 allowed")
    if stage_counts["finalize"] != 1:
        if stage_counts["finalize"] == 0:
            flag("Cardinality", -1, "no finalize event")

    return violations


def validate_run(path: str | Path) -> list[dict]:
    return validate_events(read_trace(path))
