"""dana: a structured-reasoning agent for data analysis.

The pipeline turns a natural-language analytical query over profiled data
sources into a verified, guideline-formatted answer:

    goal construction -> contextual grounding -> workflow scaffolding ->
    adaptive plan/execute loop -> formatted response

with deterministic record/replay of model calls, append-only run traces,
and a benchmark harness for scoring task suites.
"""

from .answering import FinalResponse, GuidelineSpec, finalize, format_answer, parse_guideline
from .belief import BeliefState, GroundedChunk, UserQuery, construct_goal, render_goal_prompt
from .bench import BenchmarkTask, ScoreReport, TaskResult, load_suite, run_suite, score_answer
from .config import RunConfig
from .executor import (
    ExecutorLimits,
    parse_executor_reply,
    render_executor_system_prompt,
    render_reflection_turn,
    run_loop,
)
from .gateway import (
    Cassette,
    ChatRequest,
    ChatResponse,
    Gateway,
    extract_json_payload,
    fingerprint,
)
from .grounding import ground_belief, render_grounding_prompt, verify_exact_chunks
from .metadata import (
    MetadataCatalog,
    ProfileConfig,
    create_metadata,
    load_catalog,
    render_metadata_digest,
    save_catalog,
)
from .pipeline import PipelineRun, run_query
from .planning import PlanTask, WorkflowPlan, init_context, render_scaffold_prompt, scaffold_plan
from .replay import replay_run
from .sandboxclient import ScriptedSandbox, SubprocessSandbox, start_session
from .state import ExecutionContext, ExecutionResult, IterationRecord, ToolInvocation
from .trace import TraceEvent, TraceWriter, read_trace, validate_events, validate_run

__version__ = "0.1.0"
