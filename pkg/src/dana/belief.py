"""Goal construction: analyze the raw query into an initial belief state.

This stage sees the query only. No metadata or SOP content is a parameter
here, which is what keeps the initial belief an uncontaminated reading of
the user's intent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import NoPayload, UnparseableBelief
from .gateway import ChatRequest, CompletionClient, extract_json_payload
from .prompts import GOAL_CONSTRUCTION, load_template

REPAIR_TURN = (
    "Your previous reply was:\n{reply}\n\n"
    "It did not contain all required sections. Respond with all four sections, "
    "each on its own labeled line: Question understanding, Entity extraction, "
    "Solution approach, Constraints."
)

_FIELD_LABELS = {
    "question_understanding": ("question understanding",),
    "entities": ("entity extraction", "entities"),
    "solution_approach": ("solution approach",),
    "constraints": ("constraints",),
}


@dataclass
class UserQuery:
    text: str
    guideline: str | None = None
    attachments_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass
class GroundedChunk:
    origin_id: str
    verbatim_text: str

    def to_dict(self) -> dict:
        return {"origin_id": self.origin_id, "verbatim_text": self.verbatim_text}

    @classmethod
    def from_dict(cls, data: dict) -> "GroundedChunk":
        return cls(data["origin_id"], data["verbatim_text"])


@dataclass
class BeliefState:
    """The agent's evolving understanding of the query.

    Revision 0 holds only the four query-derived fields; contextual
    grounding produces revision 1 by adding evidence chunks and a
    grounded approach, never by rewriting the original fields.
    """

    question_understanding: str
    entities: list[str]
    solution_approach: str
    constraints: list[str]
    grounded_chunks: list[GroundedChunk] = field(default_factory=list)
    grounded_approach: str | None = None
    revision: int = 0

    def __post_init__(self) -> None:
        if self.revision == 0 and (self.grounded_chunks or self.grounded_approach):
            raise ValueError("revision-0 beliefs cannot carry grounding")
        if self.revision < 0:
            raise ValueError("revision must be >= 0")

    def with_grounding(self, chunks: list[GroundedChunk], approach: str | None) -> "BeliefState":
        return replace(
            self,
            grounded_chunks=list(chunks),
            grounded_approach=approach,
            revision=self.revision + 1,
        )

    def serialize(self) -> str:
        """Labeled-section rendering used inside downstream prompts."""
        lines = [
            f"Question understanding: {self.question_understanding}",
            f"Entity extraction: {', '.join(self.entities)}",
            f"Solution approach: {self.solution_approach}",
            f"Constraints: {'; '.join(self.constraints) if self.constraints else '(none)'}",
        ]
        if self.grounded_approach:
            lines.append(f"Grounded approach: {self.grounded_approach}")
        if self.grounded_chunks:
            lines.append("Relevant chunks:")
            for chunk in self.grounded_chunks:
                lines.append(f'- [{chunk.origin_id}] "{chunk.verbatim_text}"')
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "question_understanding": self.question_understanding,
            "entities": list(self.entities),
            "solution_approach": self.solution_approach,
            "constraints": list(self.constraints),
            "grounded_chunks": [c.to_dict() for c in self.grounded_chunks],
            "grounded_approach": self.grounded_approach,
            "revision": self.revision,
        }


def dedupe_strings(values: list[str]) -> list[str]:
    """Order-preserving, case-insensitive dedup."""
    seen: set[str] = set()
    result = []
    for value in values:
        key = value.casefold()
        if key and key not in seen:
            seen.add(key)
            result.append(value)
    return result


def split_listy(text: str) -> list[str]:
    """Split a model-written list on commas, semicolons, and newlines."""
    items = []
    for raw in re.split(r"[,\n;]", text):
        item = raw.strip().strip("-*• ").strip().strip("\"'")
        if item:
            items.append(item)
    return items


def render_goal_prompt(query: UserQuery) -> str:
    """The goal-construction template verbatim, with the query appended as
    the user turn."""
    template = load_template(GOAL_CONSTRUCTION)
    return f"{template}\nThe user query is:\n{query.text}\n"


def _normalize_key(key: str) -> str:
    return re.sub(r"[\s_-]+", " ", key).strip().casefold()


def _sections_from_json(payload: dict) -> dict[str, str] | None:
    found: dict[str, str] = {}
    by_label = {}
    for canonical, labels in _FIELD_LABELS.items():
        for label in labels:
            by_label[label] = canonical
    for key, value in payload.items():
        canonical = by_label.get(_normalize_key(str(key)))
        if canonical is None:
            continue
        if isinstance(value, list):
            found[canonical] = ", ".join(str(v) for v in value)
        else:
            found[canonical] = str(value)
    return found or None


def _sections_from_text(text: str) -> dict[str, str]:
    """Tolerant labeled-section scan: case-insensitive labels at line
    starts (markdown prefixes allowed), content runs to the next label."""
    label_alternation = "|".join(
        re.escape(label) for labels in _FIELD_LABELS.values() for label in labels
    )
    pattern = re.compile(
        rf"^[#*\->\s]*({label_alternation})\s*:\s*",
        re.IGNORECASE | re.MULTILINE,
    )
    by_label = {}
    for canonical, labels in _FIELD_LABELS.items():
        for label in labels:
            by_label[label.casefold()] = canonical

    sections: dict[str, str] = {}
    matches = list(pattern.finditer(text))
    for i, match in enumerate(matches):
        canonical = by_label[match.group(1).casefold()]
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        content = text[match.end():end].strip()
        if canonical not in sections:
            sections[canonical] = content
    return sections


def parse_belief_reply(text: str) -> BeliefState:
    """Accepts either a structured payload or labeled-section prose.

    Raises UnparseableBelief when any of the four fields is missing or
    empty.
    """
    sections: dict[str, str] | None = None
    try:
        sections = _sections_from_json(extract_json_payload(text))
    except NoPayload:
        sections = None
    if not sections or len(sections) < len(_FIELD_LABELS):
        sections = _sections_from_text(text)

    missing = [name for name in _FIELD_LABELS if not sections.get(name, "").strip()]
    if missing:
        raise UnparseableBelief(f"reply is missing sections: {', '.join(missing)}")

    return BeliefState(
        question_understanding=sections["question_understanding"].strip(),
        entities=dedupe_strings(split_listy(sections["entities"])),
        solution_approach=sections["solution_approach"].strip(),
        constraints=split_listy(sections["constraints"]),
        revision=0,
    )


def construct_goal(query: UserQuery, gateway: CompletionClient, *, model_id: str = "default") -> BeliefState:
    """Build the revision-0 belief from the query alone.

    One automatic repair re-ask is allowed when the reply lacks a section;
    a second failure raises UnparseableBelief.
    """
    template = load_template(GOAL_CONSTRUCTION)
    turns = [f"The user query is:\n{query.text}"]

    response = gateway.complete(
        ChatRequest(system_text=template, user_turns=list(turns), model_id=model_id, request_tag="goal")
    )
    try:
        return parse_belief_reply(response.text)
    except UnparseableBelief:
        turns.append(REPAIR_TURN.format(reply=response.text))
        retry = gateway.complete(
            ChatRequest(system_text=template, user_turns=list(turns), model_id=model_id, request_tag="goal_repair")
        )
        return parse_belief_reply(retry.text)
