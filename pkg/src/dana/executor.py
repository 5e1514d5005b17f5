"""Adaptive planning and execution: derive code, run it, reflect, advance.

The loop is strictly sequential and hard-bounded: every pass appends
exactly one IterationRecord, task ids never move backward, and the
iteration budget is enforced by the loop structure itself rather than
trusted to the model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import InconsistentDecision, NoPayload, ParseError, UnparseableExecutorReply
from .gateway import ChatRequest, CompletionClient, extract_json_payload
from .metadata import MetadataCatalog, render_metadata_digest
from .planning import (
    TASK_COMPLETED,
    TASK_FAILED,
    TASK_IN_PROGRESS,
    TASK_PENDING,
    WorkflowPlan,
    init_context,
    render_files_list,
)
from .prompts import (
    ADAPTIVE_EXECUTOR_REFLECTION,
    ADAPTIVE_EXECUTOR_SYSTEM,
    fill_template,
    load_template,
)
from .sandboxclient import Sandbox
from .state import (
    FAILURE_BUDGET,
    PLAN_COMPLETED,
    PLAN_IN_PROGRESS,
    ExecutionContext,
    ExecutionResult,
    IterationRecord,
    ToolInvocation,
)

log = logging.getLogger(__name__)

# The executor contract rendered into the {output_format} slot: the
# smallest schema that satisfies all five reflection instructions.
EXECUTOR_OUTPUT_FORMAT = """\
{
  "plan_status": "in_progress" | "completed",
  "current_task_id": <1-based id of the task being worked on>,
  "action": {
    "type": "code_snippet" | "final_answer" | "reflection_only",
    "code": "<python snippet, required for code_snippet>",
    "answer": <final answer value, required for final_answer>
  },
  "reasoning": "<one short paragraph>",
  "variables_note": "<optional summary of live variables>"
}"""

KICKOFF_TURN = (
    "Begin executing the plan. Start with task 1 and respond only with the "
    "required JSON format."
)

EXECUTOR_REPAIR_TURN = (
    "Your previous reply was:\n{reply}\n\n"
    "It did not follow the output format. Respond with only a JSON object "
    "in exactly this format:\n{schema}"
)

CONTINUE_TURN = "Continue with the plan. Respond only with the required JSON format."

TRUNCATION_MARKER = "\n...[truncated, {total} chars total]"


@dataclass
class ExecutorLimits:
    max_iterations: int = 25
    snippet_timeout_s: float = 60.0
    stdout_cap: int = 16 * 1024
    stderr_cap: int = 16 * 1024
    history_char_budget: int = 120_000

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "snippet_timeout_s": self.snippet_timeout_s,
            "stdout_cap": self.stdout_cap,
            "stderr_cap": self.stderr_cap,
            "history_char_budget": self.history_char_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutorLimits":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass
class ExecutorDecision:
    plan_status: str
    current_task_id: int | None
    kind: str
    code: str | None
    answer: object
    reasoning: str
    variables_note: str | None = None


def render_executor_system_prompt(
    plan: WorkflowPlan,
    files_list: list[str],
    catalog_digest: str,
    instructions: str,
    output_schema_text: str = EXECUTOR_OUTPUT_FORMAT,
) -> str:
    return fill_template(
        load_template(ADAPTIVE_EXECUTOR_SYSTEM),
        {
            "plan": plan.serialize(),
            "files_list": render_files_list(files_list),
            "metadata": catalog_digest,
            "instructions": instructions.strip() or "(none)",
            "output_format": output_schema_text,
        },
    )


def truncate_output(text: str, cap: int) -> tuple[str, bool]:
    if len(text) <= cap:
        return text, False
    return text[:cap] + TRUNCATION_MARKER.format(total=len(text)), True


def format_result(result: ExecutionResult, limits: ExecutorLimits) -> str:
    """Textual form of an execution result for the reflection turn.

    Durations are deliberately omitted: they vary between record and
    replay and would poison request fingerprints.
    """
    stdout, _ = truncate_output(result.stdout, limits.stdout_cap)
    stderr, _ = truncate_output(result.stderr, limits.stderr_cap)
    return "\n".join(
        [
            f"status: {result.status}",
            "stdout:",
            stdout if stdout else "(empty)",
            "stderr:",
            stderr if stderr else "(empty)",
            f"value: {result.value_repr if result.value_repr is not None else '(none)'}",
        ]
    )


def render_reflection_turn(result: ExecutionResult, limits: ExecutorLimits | None = None) -> str:
    limits = limits or ExecutorLimits()
    return fill_template(
        load_template(ADAPTIVE_EXECUTOR_REFLECTION),
        {"response": format_result(result, limits)},
    )


def parse_executor_reply(text: str) -> ExecutorDecision:
    """Validate a loop reply against the executor schema.

    Raises UnparseableExecutorReply for structural problems and
    InconsistentDecision for a completed status without a final answer.
    """
    try:
        payload = extract_json_payload(text)
    except NoPayload as exc:
        raise UnparseableExecutorReply("reply contains no JSON object") from exc

    plan_status = str(payload.get("plan_status", "")).strip().casefold()
    if plan_status not in (PLAN_IN_PROGRESS, PLAN_COMPLETED):
        raise UnparseableExecutorReply(f"invalid plan_status {payload.get('plan_status')!r}")

    action = payload.get("action")
    if not isinstance(action, dict):
        raise UnparseableExecutorReply("reply lacks an action object")
    kind = str(action.get("type", "")).strip().casefold()
    if kind not in ("code_snippet", "final_answer", "reflection_only"):
        raise UnparseableExecutorReply(f"invalid action type {action.get('type')!r}")

    code = action.get("code")
    answer = action.get("answer")
    if kind == "code_snippet" and (not isinstance(code, str) or not code.strip()):
        raise UnparseableExecutorReply("code_snippet action without code")
    if kind == "final_answer" and answer is None:
        raise UnparseableExecutorReply("final_answer action without an answer payload")
    if plan_status == PLAN_COMPLETED and kind != "final_answer":
        raise InconsistentDecision("plan_status completed requires a final_answer action")

    task_id = payload.get("current_task_id")
    if task_id is not None and (not isinstance(task_id, int) or task_id < 1):
        raise UnparseableExecutorReply(f"invalid current_task_id {task_id!r}")

    note = payload.get("variables_note")
    return ExecutorDecision(
        plan_status=plan_status,
        current_task_id=task_id,
        kind=kind,
        code=code if kind == "code_snippet" else None,
        answer=answer if kind == "final_answer" else None,
        reasoning=str(payload.get("reasoning", "")).strip(),
        variables_note=str(note) if note is not None else None,
    )


def _advance(context: ExecutionContext, decision: ExecutorDecision, terminal: bool) -> list[dict]:
    """Apply forward-only task transitions implied by the decision."""
    plan = context.plan_snapshot
    n = len(plan)
    transitions: list[dict] = []

    def _move(task_id: int, new_status: str) -> None:
        task = plan.task(task_id)
        order = (TASK_PENDING, TASK_IN_PROGRESS, TASK_COMPLETED)
        if task.status in (TASK_COMPLETED, TASK_FAILED):
            return
        if new_status in order and order.index(new_status) <= order.index(task.status):
            return
        transitions.append({"task_id": task_id, "from": task.status, "to": new_status})
        task.status = new_status

    current = context.current_task_id
    if current <= n:
        _move(current, TASK_IN_PROGRESS)

    target = decision.current_task_id if decision.current_task_id is not None else current
    # Task order discipline: the pointer never moves backward.
    target = min(max(target, current), n + 1)
    for task_id in range(current, min(target, n + 1)):
        _move(task_id, TASK_COMPLETED)
    context.current_task_id = target
    if target <= n:
        # The task the answer landed on is done; otherwise it is the one
        # now being worked.
        _move(target, TASK_COMPLETED if terminal else TASK_IN_PROGRESS)
    return transitions


def _compact_history(turns: list[str], budget: int) -> list[str]:
    """Summarize the oldest non-kickoff turns once the resent history
    exceeds the character budget. Deterministic, in order."""
    total = sum(len(t) for t in turns)
    if total <= budget:
        return turns
    compacted = list(turns)
    for i in range(1, len(compacted) - 1):
        if total <= budget:
            break
        original = compacted[i]
        summary = f"[iteration turn {i} compacted: {original[:80]}...]"
        if len(summary) < len(original):
            total -= len(original) - len(summary)
            compacted[i] = summary
    return compacted


def run_loop(
    plan: WorkflowPlan,
    catalog: MetadataCatalog,
    instructions: str,
    files_list: list[str],
    sandbox: Sandbox,
    gateway: CompletionClient,
    limits: ExecutorLimits | None = None,
    *,
    model_id: str = "default",
    digest_budget: int = 12_000,
    on_iteration=None,
) -> ExecutionContext:
    """Drive derive -> execute -> observe -> update until the plan
    completes or the budget runs out.

    Returns the terminal context: final_status "completed" when the model
    delivered a final answer (or finished every task), "failed" with
    failure_reason when the iteration budget was exhausted. on_iteration,
    when given, is called with each IterationRecord as it is appended.
    """
    limits = limits or ExecutorLimits()
    context = init_context(plan)
    digest = render_metadata_digest(catalog, digest_budget)
    system_text = render_executor_system_prompt(plan, files_list, digest, instructions)
    turns: list[str] = [KICKOFF_TURN]

    for iteration in range(1, limits.max_iterations + 1):
        decision, note = _ask_with_repair(gateway, system_text, turns, model_id, iteration, limits)

        if decision is None:
            record = IterationRecord(
                invocation=ToolInvocation(
                    iteration=iteration,
                    kind="reflection_only",
                    stated_intent="executor reply unparseable after repair",
                ),
                result=None,
                plan_status=PLAN_IN_PROGRESS,
                note=note,
            )
            context.append_record(record)
            if on_iteration:
                on_iteration(record)
            turns.append(CONTINUE_TURN)
            continue

        terminal = decision.kind == "final_answer"
        if decision.variables_note:
            context.variables_note = decision.variables_note

        result: ExecutionResult | None = None
        if decision.kind == "code_snippet":
            result = sandbox.execute(decision.code, limits.snippet_timeout_s)

        transitions = _advance(context, decision, terminal)
        record = IterationRecord(
            invocation=ToolInvocation(
                iteration=iteration,
                kind=decision.kind,
                stated_intent=decision.reasoning[:200],
                code=decision.code,
                answer=decision.answer,
            ),
            result=result,
            plan_status=PLAN_COMPLETED if terminal else decision.plan_status,
            task_transitions=transitions,
            reasoning=decision.reasoning,
            note=note,
        )
        context.append_record(record)
        if on_iteration:
            on_iteration(record)

        if terminal:
            # A delivered answer ends the run even if the model forgot to
            # flip plan_status; the reverse (completed without an answer)
            # is rejected at parse time.
            context.final_status = "completed"
            return context
        if context.current_task_id > len(plan):
            context.final_status = "completed"
            return context

        if result is not None:
            turns.append(render_reflection_turn(result, limits))
        else:
            turns.append(CONTINUE_TURN)
        turns = _compact_history(turns, limits.history_char_budget)

    context.final_status = "failed"
    context.failure_reason = FAILURE_BUDGET
    log.warning("run halted: iteration budget of %d exhausted", limits.max_iterations)
    return context


def _ask_with_repair(
    gateway: CompletionClient,
    system_text: str,
    turns: list[str],
    model_id: str,
    iteration: int,
    limits: ExecutorLimits,
) -> tuple[ExecutorDecision | None, str]:
    """One derive step: ask, and on a malformed reply re-ask once quoting
    the schema. A second failure is reported as a failed iteration, not a
    run abort."""
    response = gateway.complete(
        ChatRequest(
            system_text=system_text,
            user_turns=list(turns),
            model_id=model_id,
            request_tag=f"executor_iteration_{iteration}",
        )
    )
    try:
        return parse_executor_reply(response.text), ""
    except ParseError as first_error:
        turns.append(EXECUTOR_REPAIR_TURN.format(reply=response.text, schema=EXECUTOR_OUTPUT_FORMAT))
        retry = gateway.complete(
            ChatRequest(
                system_text=system_text,
                user_turns=list(turns),
                model_id=model_id,
                request_tag=f"executor_iteration_{iteration}_repair",
            )
        )
        try:
            return parse_executor_reply(retry.text), f"repaired after: {first_error}"
        except ParseError as second_error:
            return None, f"unparseable twice: {first_error}; then: {second_error}"
