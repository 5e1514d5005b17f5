"""End-to-end orchestration of one query: goal -> grounding -> scaffold ->
execute loop -> response, with every stage recorded in the trace."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .answering import FinalResponse, finalize, parse_guideline
from .belief import UserQuery, construct_goal
from .config import RunConfig
from .errors import GroundingEmpty
from .executor import run_loop
from .gateway import CompletionClient, ExchangeCollector
from .grounding import ground_belief
from .metadata import MetadataCatalog
from .planning import scaffold_plan
from .sandboxclient import Sandbox
from .state import ExecutionContext
from .trace import TraceWriter

log = logging.getLogger(__name__)


@dataclass
class PipelineRun:
    response: FinalResponse
    context: ExecutionContext
    run_id: str
    trace_path: Path


def run_query(
    query: UserQuery,
    catalog: MetadataCatalog,
    config: RunConfig,
    gateway: CompletionClient,
    sandbox: Sandbox,
    trace: TraceWriter,
) -> PipelineRun:
    """Execute the main procedure for one query.

    Stage failures propagate to the caller after the partial trace has
    been flushed; completed runs end with exactly one finalize event.
    """
    trace.emit(
        "metadata",
        {
            "config": config.to_dict(),
            "catalog_fingerprint": catalog.fingerprint(),
            "query": {"text": query.text, "guideline": query.guideline},
        },
    )

    collector = ExchangeCollector(gateway)
    belief = construct_goal(query, collector, model_id=config.model_id)
    trace.emit("goal", {"belief": belief.to_dict(), "exchanges": collector.drain()})

    try:
        belief, grounding_result = ground_belief(
            belief, catalog, query, collector,
            model_id=config.model_id, digest_budget=config.digest_budget,
        )
        trace.emit(
            "grounding",
            {
                "grounded": True,
                "belief": belief.to_dict(),
                "chunk_rejected": list(grounding_result.rejected),
                "exchanges": collector.drain(),
            },
        )
    except GroundingEmpty as exc:
        # Proceed ungrounded rather than fail an easy query, but make the
        # degradation visible.
        belief = belief.with_grounding([], None)
        trace.emit(
            "grounding",
            {"grounded": False, "note": str(exc), "belief": belief.to_dict(), "exchanges": collector.drain()},
        )

    # Prompts name sources by their stable catalog ids; generated code runs
    # with the data directory as its working dir, so ids double as paths.
    files_list = catalog.source_ids()
    instructions = config.instructions_text()
    plan = scaffold_plan(
        belief, catalog, files_list, instructions, query, collector, model_id=config.model_id,
    )
    trace.emit("scaffold", {"plan": plan.to_dict(), "exchanges": collector.drain()})

    def _on_iteration(record) -> None:
        trace.emit(
            "executor_iteration",
            {
                "iteration": record.invocation.iteration,
                "record": record.to_dict(),
                "exchanges": collector.drain(),
            },
        )

    context = run_loop(
        plan,
        catalog,
        instructions,
        files_list,
        sandbox,
        collector,
        config.limits,
        model_id=config.model_id,
        digest_budget=config.digest_budget,
        on_iteration=_on_iteration,
    )

    spec = parse_guideline(query.guideline)
    response = finalize(context, query, spec, trace_ref=trace.run_id)
    trace.emit(
        "finalize",
        {
            "final_status": context.final_status,
            "failure_reason": context.failure_reason,
            "guideline_spec": spec.to_dict(),
            "answer_text": response.answer_text,
            "supporting_summary": response.supporting_summary,
        },
    )
    return PipelineRun(response=response, context=context, run_id=trace.run_id, trace_path=trace.path)
