"""Final-answer formatting under the task's guideline.

Formatting is fully deterministic — a keyword-rule parser turns guideline
prose into a GuidelineSpec, and a validator re-parses every produced
answer before it is allowed out. Scoring depends on this determinism.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import FormatMismatch
from .state import FAILURE_NO_ANSWER, ExecutionContext

log = logging.getLogger(__name__)

KIND_COMMA_LIST = "comma_list"
KIND_SCALAR = "scalar"
KIND_NUMERIC = "numeric_with_precision"
KIND_FREE_TEXT = "free_text"
GUIDELINE_KINDS = (KIND_COMMA_LIST, KIND_SCALAR, KIND_NUMERIC, KIND_FREE_TEXT)

DEFAULT_NOT_APPLICABLE = "Not Applicable"

_DECIMALS_RE = re.compile(
    r"(?:round(?:ed)?\s+(?:off\s+)?to\s+|to\s+)?(\d+)\s+decimal(?:\s+place)?s?",
    re.IGNORECASE,
)
_LIST_HINTS = ("comma-separated list", "comma separated list", "list of values")
_SCALAR_HINTS = ("single value", "single number", "one value", "a number only")


@dataclass
class GuidelineSpec:
    kind: str = KIND_FREE_TEXT
    not_applicable_token: str = DEFAULT_NOT_APPLICABLE
    empty_list_token: str = ""
    decimals: int | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.kind not in GUIDELINE_KINDS:
            raise ValueError(f"invalid guideline kind {self.kind!r}")
        if (self.decimals is not None) != (self.kind == KIND_NUMERIC):
            raise ValueError("decimals present iff kind is numeric_with_precision")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "not_applicable_token": self.not_applicable_token,
            "empty_list_token": self.empty_list_token,
            "decimals": self.decimals,
        }


@dataclass
class FinalResponse:
    answer_text: str
    supporting_summary: str
    task_echo: str
    trace_ref: str


def parse_guideline(guideline_text: str | None) -> GuidelineSpec:
    """Keyword-rule detection of the answer contract.

    The full rule table lives in docs/answers.md. Always yields a spec;
    ambiguity degrades to free_text with a note.
    """
    if guideline_text is None or not guideline_text.strip():
        return GuidelineSpec(kind=KIND_FREE_TEXT)
    lowered = guideline_text.casefold()

    decimals_match = _DECIMALS_RE.search(guideline_text)
    wants_list = any(hint in lowered for hint in _LIST_HINTS)
    wants_scalar = any(hint in lowered for hint in _SCALAR_HINTS)

    if wants_list:
        return GuidelineSpec(kind=KIND_COMMA_LIST)
    if decimals_match:
        return GuidelineSpec(kind=KIND_NUMERIC, decimals=int(decimals_match.group(1)))
    if wants_scalar:
        return GuidelineSpec(kind=KIND_SCALAR)
    return GuidelineSpec(kind=KIND_FREE_TEXT, note="no formatting keywords recognized")


def _is_not_applicable(raw) -> bool:
    return isinstance(raw, str) and raw.strip().casefold() == DEFAULT_NOT_APPLICABLE.casefold()


def format_answer(raw, spec: GuidelineSpec) -> str:
    """Render the executor's final payload under the guideline grammar.

    Shape mismatches raise FormatMismatch instead of being silently
    coerced; the caller decides how to surface them.
    """
    if raw is None or _is_not_applicable(raw):
        return spec.not_applicable_token

    if spec.kind == KIND_COMMA_LIST:
        if not isinstance(raw, (list, tuple)):
            raise FormatMismatch(f"comma_list answer expects a list, got {type(raw).__name__}", raw)
        if not raw:
            return spec.empty_list_token
        return ", ".join(_element_text(item) for item in raw)

    if spec.kind == KIND_NUMERIC:
        try:
            number = float(raw if not isinstance(raw, str) else raw.strip())
        except (TypeError, ValueError):
            raise FormatMismatch(f"numeric answer expects a number, got {raw!r}", raw)
        return f"{number:.{spec.decimals}f}"

    # scalar and free_text
    if isinstance(raw, (list, tuple)):
        raise FormatMismatch(f"{spec.kind} answer expects a scalar, got a list", raw)
    return _element_text(raw)


def _element_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value).strip()


def parse_answer(text: str, spec: GuidelineSpec):
    """Inverse of format_answer, used by the conformance validator and by
    scoring normalization."""
    if spec.kind == KIND_COMMA_LIST:
        if text == spec.empty_list_token:
            return []
        return [part.strip() for part in text.split(",")]
    return text


def validate_answer(text: str, spec: GuidelineSpec) -> bool:
    """Machine check that an answer string obeys the spec grammar."""
    if text == spec.not_applicable_token:
        return True
    if spec.kind == KIND_COMMA_LIST:
        if text == spec.empty_list_token:
            return True
        # The grammar is exactly what format_answer emits, so conformance
        # is a round-trip check.
        try:
            return format_answer(parse_answer(text, spec), spec) == text
        except FormatMismatch:
            return False
    if spec.kind == KIND_NUMERIC:
        if not re.fullmatch(r"-?\d+\.\d*|-?\d+", text):
            return False
        decimals = len(text.split(".")[1]) if "." in text else 0
        return decimals == spec.decimals
    return True  # scalar / free_text accept any single-line-ish string


def finalize(context: ExecutionContext, query, spec: GuidelineSpec, *, trace_ref: str = "") -> FinalResponse:
    """Contextualize a terminal run into the user-facing response."""
    if not context.is_terminal:
        raise ValueError("finalize requires a terminal execution context")

    if context.final_status != "completed":
        summary = f"Run failed ({context.failure_reason or 'unknown failure'}); no answer produced."
        return FinalResponse(
            answer_text=spec.not_applicable_token,
            supporting_summary=summary,
            task_echo=query.text,
            trace_ref=trace_ref,
        )

    raw = context.final_answer_payload()
    if raw is None:
        summary = f"Run completed every task but delivered no final answer ({FAILURE_NO_ANSWER})."
        return FinalResponse(
            answer_text=spec.not_applicable_token,
            supporting_summary=summary,
            task_echo=query.text,
            trace_ref=trace_ref,
        )

    try:
        answer_text = format_answer(raw, spec)
    except FormatMismatch as exc:
        log.warning("final answer shape mismatch: %s", exc)
        return FinalResponse(
            answer_text=spec.not_applicable_token,
            supporting_summary=(
                f"FORMAT MISMATCH: {exc}. Raw payload preserved verbatim: {raw!r}. "
                + context.last_reasoning()
            ),
            task_echo=query.text,
            trace_ref=trace_ref,
        )

    if not validate_answer(answer_text, spec):
        raise FormatMismatch(f"formatted answer {answer_text!r} failed grammar validation", raw)

    return FinalResponse(
        answer_text=answer_text,
        supporting_summary=context.last_reasoning() or "Answer produced by the execute loop.",
        task_echo=query.text,
        trace_ref=trace_ref,
    )
