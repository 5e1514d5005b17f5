"""Iteration-indexed working memory for the adaptive execute loop.

The context is append-only by contract: each loop pass adds exactly one
IterationRecord and past records are never mutated, which is what makes
runs auditable and replayable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

INVOCATION_KINDS = ("code_snippet", "final_answer", "reflection_only")
EXEC_STATUSES = ("ok", "runtime_error", "timeout", "resource_limit")

PLAN_IN_PROGRESS = "in_progress"
PLAN_COMPLETED = "completed"

FAILURE_BUDGET = "IterationBudgetExhausted"
FAILURE_NO_ANSWER = "NoFinalAnswer"


@dataclass
class ToolInvocation:
    iteration: int
    kind: str
    stated_intent: str = ""
    code: str | None = None
    answer: object = None

    def __post_init__(self) -> None:
        if self.kind not in INVOCATION_KINDS:
            raise ValueError(f"invalid invocation kind {self.kind!r}")
        if self.kind == "code_snippet" and not self.code:
            raise ValueError("code_snippet invocations require code")
        if self.kind == "final_answer" and self.answer is None:
            raise ValueError("final_answer invocations require an answer payload")

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "kind": self.kind,
            "stated_intent": self.stated_intent,
            "code": self.code,
            "answer": self.answer,
        }


@dataclass
class ExecutionResult:
    status: str
    stdout: str = ""
    stderr: str = ""
    value_repr: str | None = None
    duration_ms: int = 0
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.status not in EXEC_STATUSES:
            raise ValueError(f"invalid execution status {self.status!r}")
        if self.duration_ms < 0:
            raise ValueError("duration_ms must be >= 0")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "value_repr": self.value_repr,
            "duration_ms": self.duration_ms,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionResult":
        return cls(
            status=data["status"],
            stdout=data.get("stdout", ""),
            stderr=data.get("stderr", ""),
            value_repr=data.get("value_repr"),
            duration_ms=int(data.get("duration_ms", 0)),
            truncated=bool(data.get("truncated", False)),
        )


@dataclass
class IterationRecord:
    invocation: ToolInvocation
    result: ExecutionResult | None
    plan_status: str
    task_transitions: list[dict] = field(default_factory=list)
    reasoning: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "invocation": self.invocation.to_dict(),
            "result": self.result.to_dict() if self.result else None,
            "plan_status": self.plan_status,
            "task_transitions": list(self.task_transitions),
            "reasoning": self.reasoning,
            "note": self.note,
        }

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ExecutionContext:
    """C_0..C_n: what the loop has done so far and where it stands."""

    current_task_id: int
    plan_snapshot: "WorkflowPlan"  # noqa: F821 - planning imports this module
    records: list[IterationRecord] = field(default_factory=list)
    variables_note: str = ""
    final_status: str | None = None  # "completed" | "failed" once terminal
    failure_reason: str | None = None

    @property
    def iteration(self) -> int:
        return len(self.records)

    @property
    def is_terminal(self) -> bool:
        return self.final_status is not None

    def append_record(self, record: IterationRecord) -> None:
        if record.invocation.iteration != self.iteration + 1:
            raise ValueError(
                f"record for iteration {record.invocation.iteration} "
                f"appended at iteration {self.iteration}"
            )
        self.records.append(record)

    def final_answer_payload(self):
        for record in reversed(self.records):
            if record.invocation.kind == "final_answer":
                return record.invocation.answer
        return None

    def last_reasoning(self) -> str:
        return self.records[-1].reasoning if self.records else ""
