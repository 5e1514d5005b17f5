"""Re-drive a recorded run from its own trace and check it reproduces.

A trace stores every prompt and reply in full, so it doubles as a
cassette: rebuild the request/response map, script the sandbox from the
recorded execution results, run the pipeline again, and compare what
comes out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .belief import UserQuery
from .config import RunConfig
from .errors import RunNotFound
from .gateway import Cassette, ChatRequest, ChatResponse, Gateway, fingerprint
from .metadata import MetadataCatalog, load_catalog
from .pipeline import run_query
from .sandboxclient import ScriptedSandbox
from .state import ExecutionResult
from .trace import TraceEvent, TraceWriter, read_trace


@dataclass
class ReplayReport:
    ok: bool
    mismatches: list[str] = field(default_factory=list)
    answer_text: str = ""
    replay_trace_path: str = ""


def _cassette_from_events(events: list[TraceEvent]) -> Cassette:
    entries: dict[str, ChatResponse] = {}
    for event in events:
        for exchange in event.payload.get("exchanges", []):
            req = exchange["request"]
            request = ChatRequest(
                system_text=req["system_text"],
                user_turns=list(req["user_turns"]),
                model_id=req.get("model_id", "default"),
                temperature=req.get("temperature", 0.0),
                request_tag=req.get("request_tag", "replay"),
            )
            entries[fingerprint(request)] = ChatResponse.from_dict(exchange["response"])
    return Cassette.in_memory(entries, mode="replay")


def _sandbox_from_events(events: list[TraceEvent]) -> ScriptedSandbox:
    results = []
    for event in events:
        if event.stage != "executor_iteration":
            continue
        result = event.payload.get("record", {}).get("result")
        if result is not None:
            results.append(ExecutionResult.from_dict(result))
    return ScriptedSandbox(results)


def _iteration_views(events: list[TraceEvent]) -> list[dict]:
    views = []
    for event in events:
        if event.stage != "executor_iteration":
            continue
        record = dict(event.payload.get("record", {}))
        record.pop("note", None)  # repair notes describe transport, not outcome
        views.append(record)
    return views


def replay_run(trace_path: str | Path, catalog: MetadataCatalog | None = None) -> ReplayReport:
    """Run the pipeline again from a trace and report any divergence."""
    trace_path = Path(trace_path)
    events = read_trace(trace_path)
    if not events or events[0].stage != "metadata":
        raise RunNotFound(f"trace {trace_path} lacks a run-header metadata event")

    header = events[0].payload
    config = RunConfig.from_dict(header["config"])
    query = UserQuery(
        text=header["query"]["text"],
        guideline=header["query"].get("guideline"),
    )
    if catalog is None:
        catalog = load_catalog(config.catalog_path)

    mismatches: list[str] = []
    recorded_fp = header.get("catalog_fingerprint")
    if recorded_fp and recorded_fp != catalog.fingerprint():
        mismatches.append("catalog content changed since the run was recorded")

    gateway = Gateway(cassette=_cassette_from_events(events))
    sandbox = _sandbox_from_events(events)
    replay_path = trace_path.with_suffix(trace_path.suffix + ".replay")
    trace = TraceWriter(replay_path, run_id=events[0].run_id)

    run = run_query(query, catalog, config, gateway, sandbox, trace)

    original_final = next(e for e in events if e.stage == "finalize")
    if run.response.answer_text != original_final.payload.get("answer_text"):
        mismatches.append(
            f"answer diverged: {run.response.answer_text!r} != "
            f"{original_final.payload.get('answer_text')!r}"
        )
    if run.context.final_status != original_final.payload.get("final_status"):
        mismatches.append(
            f"final status diverged: {run.context.final_status!r} != "
            f"{original_final.payload.get('final_status')!r}"
        )

    new_events = read_trace(replay_path)
    original_iters = _iteration_views(events)
    new_iters = _iteration_views(new_events)
    if len(original_iters) != len(new_iters):
        mismatches.append(f"iteration count diverged: {len(new_iters)} != {len(original_iters)}")
    else:
        for i, (old, new) in enumerate(zip(original_iters, new_iters), start=1):
            if old != new:
                mismatches.append(f"iteration {i} record diverged")

    return ReplayReport(
        ok=not mismatches,
        mismatches=mismatches,
        answer_text=run.response.answer_text,
        replay_trace_path=str(replay_path),
    )
