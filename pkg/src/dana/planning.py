"""Workflow scaffolding: the global checklist produced before data contact.

The scaffold is deliberately data-blind. Its prompt sees the catalog
digest (schema, types, sampled values) and the grounded belief, never raw
rows, so the plan constrains execution instead of chasing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import NoPayload, PlanTooLarge, UnparseablePlan
from .gateway import ChatRequest, CompletionClient, extract_json_payload
from .metadata import MetadataCatalog, render_metadata_digest
from .prompts import WORKFLOW_SCAFFOLDING, fill_template, load_template
from .state import ExecutionContext

MAX_PLAN_TASKS = 12

TASK_PENDING = "pending"
TASK_IN_PROGRESS = "in_progress"
TASK_COMPLETED = "completed"
TASK_FAILED = "failed"
TASK_STATUSES = (TASK_PENDING, TASK_IN_PROGRESS, TASK_COMPLETED, TASK_FAILED)

# The published checklist schema rendered into the {output_format} slot.
PLAN_OUTPUT_FORMAT = """\
{
  "tasks": [
    {"id": 1, "description": "<what to do>", "expected_outcome": "<what done looks like>"}
  ],
  "rationale": "<why this checklist solves the query>"
}"""

PLAN_REPAIR_TURN = (
    "Your previous reply was:\n{reply}\n\n"
    "It was not a parsable JSON checklist. Respond with only a JSON object "
    "in exactly this format:\n{schema}"
)


@dataclass
class PlanTask:
    task_id: int
    description: str
    expected_outcome: str = ""
    status: str = TASK_PENDING

    def __post_init__(self) -> None:
        if self.task_id < 1:
            raise ValueError("task_id is 1-based")
        if not self.description.strip():
            raise ValueError("task description must be non-empty")
        if self.status not in TASK_STATUSES:
            raise ValueError(f"invalid task status {self.status!r}")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "description": self.description,
            "expected_outcome": self.expected_outcome,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanTask":
        return cls(
            task_id=data["task_id"],
            description=data["description"],
            expected_outcome=data.get("expected_outcome", ""),
            status=data.get("status", TASK_PENDING),
        )


@dataclass
class WorkflowPlan:
    tasks: list[PlanTask]
    rationale: str = ""
    source_belief_revision: int = 0
    renumbered: bool = False

    def __post_init__(self) -> None:
        if not self.tasks:
            raise ValueError("a plan needs at least one task")
        ids = [t.task_id for t in self.tasks]
        if ids != list(range(1, len(self.tasks) + 1)):
            raise ValueError("task ids must be contiguous from 1")

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: int) -> PlanTask:
        return self.tasks[task_id - 1]

    def serialize(self) -> str:
        """Checklist rendering used inside the executor system prompt."""
        lines = []
        for task in self.tasks:
            line = f"{task.task_id}. {task.description}"
            if task.expected_outcome:
                line += f" (expected outcome: {task.expected_outcome})"
            lines.append(line)
        return "\n".join(lines)

    def clone(self) -> "WorkflowPlan":
        return WorkflowPlan(
            tasks=[replace(t) for t in self.tasks],
            rationale=self.rationale,
            source_belief_revision=self.source_belief_revision,
            renumbered=self.renumbered,
        )

    def to_dict(self) -> dict:
        return {
            "tasks": [t.to_dict() for t in self.tasks],
            "rationale": self.rationale,
            "source_belief_revision": self.source_belief_revision,
            "renumbered": self.renumbered,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkflowPlan":
        return cls(
            tasks=[PlanTask.from_dict(t) for t in data["tasks"]],
            rationale=data.get("rationale", ""),
            source_belief_revision=data.get("source_belief_revision", 0),
            renumbered=data.get("renumbered", False),
        )


def render_files_list(files: list[str]) -> str:
    return "\n".join(files) if files else "(none)"


def render_scaffold_prompt(
    belief,
    catalog: MetadataCatalog,
    files_list: list[str],
    custom_instructions: str,
    query,
    *,
    output_schema_text: str = PLAN_OUTPUT_FORMAT,
    digest_budget: int = 12_000,
) -> str:
    return fill_template(
        load_template(WORKFLOW_SCAFFOLDING),
        {
            "context_for_planner": belief.serialize(),
            "metadata": render_metadata_digest(catalog, digest_budget),
            "files_list": render_files_list(files_list),
            "custom_instructions": custom_instructions.strip() or "(none)",
            "output_format": output_schema_text,
            "query": query.text,
        },
    )


def parse_plan_reply(text: str, *, max_tasks: int = MAX_PLAN_TASKS, belief_revision: int = 0) -> WorkflowPlan:
    """Validate a model reply against the plan schema.

    Tasks with gapped or unordered ids are renumbered contiguously
    (flagged on the plan); structural violations raise UnparseablePlan.
    """
    try:
        payload = extract_json_payload(text)
    except NoPayload as exc:
        raise UnparseablePlan("reply contains no JSON object") from exc

    raw_tasks = payload.get("tasks")
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise UnparseablePlan("plan JSON lacks a non-empty tasks list")
    if len(raw_tasks) > max_tasks:
        raise PlanTooLarge(f"plan has {len(raw_tasks)} tasks, max is {max_tasks}")

    entries = []
    for position, item in enumerate(raw_tasks):
        if not isinstance(item, dict):
            raise UnparseablePlan(f"task {position + 1} is not an object")
        description = str(item.get("description", "")).strip()
        if not description:
            raise UnparseablePlan(f"task {position + 1} has no description")
        raw_id = item.get("id", position + 1)
        if not isinstance(raw_id, int) or raw_id < 1:
            raise UnparseablePlan(f"task {position + 1} has invalid id {raw_id!r}")
        entries.append((raw_id, position, description, str(item.get("expected_outcome", "")).strip()))

    entries.sort(key=lambda e: (e[0], e[1]))
    renumbered = [e[0] for e in entries] != list(range(1, len(entries) + 1))
    tasks = [
        PlanTask(task_id=i, description=desc, expected_outcome=outcome)
        for i, (_raw, _pos, desc, outcome) in enumerate(entries, start=1)
    ]
    return WorkflowPlan(
        tasks=tasks,
        rationale=str(payload.get("rationale", "")).strip(),
        source_belief_revision=belief_revision,
        renumbered=renumbered,
    )


def scaffold_plan(
    belief,
    catalog: MetadataCatalog,
    files_list: list[str],
    instructions: str,
    query,
    gateway: CompletionClient,
    *,
    model_id: str = "default",
    max_tasks: int = MAX_PLAN_TASKS,
) -> WorkflowPlan:
    """Generate the global plan, with one schema-repair re-ask."""
    prompt = render_scaffold_prompt(belief, catalog, files_list, instructions, query)
    turns = [prompt]
    response = gateway.complete(
        ChatRequest(system_text="", user_turns=list(turns), model_id=model_id, request_tag="scaffold")
    )
    try:
        return parse_plan_reply(response.text, max_tasks=max_tasks, belief_revision=belief.revision)
    except UnparseablePlan:
        turns.append(PLAN_REPAIR_TURN.format(reply=response.text, schema=PLAN_OUTPUT_FORMAT))
        retry = gateway.complete(
            ChatRequest(system_text="", user_turns=list(turns), model_id=model_id, request_tag="scaffold_repair")
        )
        return parse_plan_reply(retry.text, max_tasks=max_tasks, belief_revision=belief.revision)


def init_context(plan: WorkflowPlan) -> ExecutionContext:
    """C_0: iteration zero, empty records, first task up next."""
    snapshot = plan.clone()
    for task in snapshot.tasks:
        task.status = TASK_PENDING
    return ExecutionContext(current_task_id=1, plan_snapshot=snapshot)
