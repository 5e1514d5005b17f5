"""Shared test scaffolding: scripted providers, reply builders, tiny fixtures."""

from __future__ import annotations

import json
from pathlib import Path

from dana.gateway import ChatRequest, ChatResponse, Gateway
from dana.metadata import MetadataCatalog, ProfileConfig, create_metadata, discover_sources
from dana.state import ExecutionResult


class SequenceProvider:
    """Feeds scripted reply texts in order, one per completion call."""

    def __init__(self, texts: list[str]):
        self.texts = list(texts)
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        if self.calls >= len(self.texts):
            raise AssertionError(
                f"scripted provider exhausted after {len(self.texts)} replies "
                f"(next tag was {request.request_tag!r})"
            )
        text = self.texts[self.calls]
        self.calls += 1
        return ChatResponse(text=text)


def scripted_gateway(*texts: str) -> Gateway:
    return Gateway(provider=SequenceProvider(list(texts)))


class FlakyProvider:
    """Raises a transport failure a fixed number of times, then succeeds."""

    def __init__(self, failures: int, text: str = "ok"):
        from dana.gateway import TransportFailure

        self.failures = failures
        self.text = text
        self.attempts = 0
        self._exc = TransportFailure

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.attempts += 1
        if self.attempts <= self.failures:
            raise self._exc(f"simulated 500 (attempt {self.attempts})", status=500)
        return ChatResponse(text=self.text)


# --- scripted stage replies ---------------------------------------------------

GOAL_REPLY = """\
Question understanding: {understanding}
Entity extraction: {entities}
Solution approach: {approach}
Constraints: {constraints}
"""


def goal_reply(
    understanding: str = "Compute a figure over the payments data.",
    entities: str = "payments, amount",
    approach: str = "Load the table and aggregate.",
    constraints: str = "Use euros as recorded.",
) -> str:
    return GOAL_REPLY.format(
        understanding=understanding, entities=entities, approach=approach, constraints=constraints
    )


def grounding_reply(chunks: list[str], approach: str = "Follow the fee rules while aggregating.") -> str:
    return json.dumps({"chunks": chunks, "solution_approach": approach})


def plan_reply(descriptions: list[str], ids: list[int] | None = None, rationale: str = "straightforward") -> str:
    ids = ids or list(range(1, len(descriptions) + 1))
    return json.dumps(
        {
            "tasks": [
                {"id": i, "description": d, "expected_outcome": f"outcome {i}"}
                for i, d in zip(ids, descriptions)
            ],
            "rationale": rationale,
        }
    )


def exec_code_reply(code: str, task_id: int = 1, reasoning: str = "run a snippet") -> str:
    return json.dumps(
        {
            "plan_status": "in_progress",
            "current_task_id": task_id,
            "action": {"type": "code_snippet", "code": code},
            "reasoning": reasoning,
        }
    )


def exec_final_reply(answer, task_id: int = 1, reasoning: str = "deliver the answer") -> str:
    return json.dumps(
        {
            "plan_status": "completed",
            "current_task_id": task_id,
            "action": {"type": "final_answer", "answer": answer},
            "reasoning": reasoning,
        }
    )


def ok_result(stdout: str = "", value_repr: str | None = None) -> ExecutionResult:
    return ExecutionResult(status="ok", stdout=stdout, value_repr=value_repr, duration_ms=3)


def error_result(stderr: str) -> ExecutionResult:
    return ExecutionResult(status="runtime_error", stderr=stderr, duration_ms=2)


# --- tiny on-disk corpus ------------------------------------------------------

TINY_CSV = "a,b\n1,x\n2,\n3,y\n"

TINY_SOP = """\
# Handling rules

All amounts are recorded in euros. Missing values must be treated as
not applicable.

Report lists as comma-separated values.
"""


def make_tiny_corpus(root: Path) -> tuple[Path, Path]:
    data_dir = root / "data"
    sop_dir = root / "sops"
    data_dir.mkdir(parents=True, exist_ok=True)
    sop_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "table.csv").write_text(TINY_CSV, encoding="utf-8")
    (sop_dir / "rules.md").write_text(TINY_SOP, encoding="utf-8")
    return data_dir, sop_dir


def tiny_catalog(root: Path, config: ProfileConfig | None = None) -> MetadataCatalog:
    data_dir, sop_dir = make_tiny_corpus(root)
    return create_metadata(
        discover_sources(data_dir),
        sorted(str(p) for p in sop_dir.iterdir()),
        config or ProfileConfig(),
    )
