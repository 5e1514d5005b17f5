"""Contextual grounding: refine the belief against metadata and SOPs.

The defining invariant here is exact-match soundness: a chunk the model
claims as evidence survives only if it is a contiguous substring of the
context that was actually rendered into the prompt. Fabricated or
paraphrased chunks are dropped and logged, never silently kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .belief import BeliefState, GroundedChunk, UserQuery
from .errors import GroundingEmpty, NoPayload
from .gateway import ChatRequest, CompletionClient, extract_json_payload
from .metadata import MetadataCatalog, render_metadata_digest
from .prompts import CONTEXTUAL_GROUNDING, load_template, fill_template

log = logging.getLogger(__name__)

DIGEST_BUDGET_CHARS = 12_000

_APPROACH_LABELS = ("solution approach", "grounded approach", "approach")


@dataclass
class GroundingResult:
    chunks: list[GroundedChunk] = field(default_factory=list)
    grounded_approach: str = ""
    rejected: list[str] = field(default_factory=list)


def normalize_line_endings(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def verify_exact_chunks(chunks: list[str], context: str) -> tuple[list[str], list[str]]:
    """Partition candidates into exact substrings of the context and the
    rest. Line endings are normalized on both sides first; order is
    preserved and every input lands in exactly one side.
    """
    haystack = normalize_line_endings(context)
    accepted, rejected = [], []
    for chunk in chunks:
        if normalize_line_endings(chunk) in haystack:
            accepted.append(chunk)
        else:
            rejected.append(chunk)
    return accepted, rejected


def render_grounding_prompt(
    belief: BeliefState,
    catalog_digest: str,
    sop_text: str,
    query: UserQuery,
) -> str:
    if belief.revision != 0:
        raise ValueError("grounding expects a revision-0 belief")
    return fill_template(
        load_template(CONTEXTUAL_GROUNDING),
        {
            "content": catalog_digest,
            "content2": sop_text,
            "query": query.text,
            "belief": belief.serialize(),
        },
    )


def _chunks_from_json(payload: dict) -> tuple[list[str], str]:
    chunks: list[str] = []
    approach = ""
    for key, value in payload.items():
        name = str(key).strip().casefold().replace("_", " ")
        if name in ("chunks", "relevant chunks"):
            if isinstance(value, list):
                chunks = [str(v) for v in value]
            elif isinstance(value, str):
                chunks = [value]
        elif name in _APPROACH_LABELS:
            approach = str(value)
    return chunks, approach


def _chunks_from_text(text: str) -> tuple[list[str], str]:
    """Fallback for prose replies: quoted/bulleted lines under a
    'Relevant chunks' heading, then a labeled approach section."""
    chunks: list[str] = []
    approach_lines: list[str] = []
    mode = None
    for line in text.splitlines():
        stripped = line.strip()
        lowered = stripped.casefold()
        if lowered.startswith("relevant chunks"):
            mode = "chunks"
            continue
        if any(lowered.startswith(label) for label in _APPROACH_LABELS):
            mode = "approach"
            _, _, remainder = stripped.partition(":")
            if remainder.strip():
                approach_lines.append(remainder.strip())
            continue
        if mode == "chunks" and stripped:
            candidate = stripped.lstrip("-*• ").strip()
            if candidate.startswith('"') and candidate.endswith('"') and len(candidate) > 1:
                candidate = candidate[1:-1]
            if candidate:
                chunks.append(candidate)
        elif mode == "approach" and stripped:
            approach_lines.append(stripped)
    return chunks, " ".join(approach_lines).strip()


def parse_grounding_reply(text: str) -> tuple[list[str], str]:
    try:
        payload = extract_json_payload(text)
    except NoPayload:
        payload = None
    if payload is not None:
        chunks, approach = _chunks_from_json(payload)
        if chunks or approach:
            return chunks, approach
    return _chunks_from_text(text)


def resolve_origin(chunk_text: str, catalog: MetadataCatalog, digest: str) -> str:
    """Attribute an accepted chunk to the SOP document or digest that
    contains it."""
    needle = normalize_line_endings(chunk_text)
    for doc in catalog.sops:
        if needle in normalize_line_endings(doc.body):
            return doc.doc_id
    if needle in normalize_line_endings(digest):
        for profile in catalog.sources:
            if needle in _source_digest_section(profile, digest):
                return profile.descriptor.source_id
        return "metadata_digest"
    return "context"


def _source_digest_section(profile, digest: str) -> str:
    marker = f"[source] {profile.descriptor.source_id} "
    start = digest.find(marker)
    if start == -1:
        return ""
    end = digest.find("[source] ", start + len(marker))
    return digest[start : end if end != -1 else len(digest)]


def ground_belief(
    belief: BeliefState,
    catalog: MetadataCatalog,
    query: UserQuery,
    gateway: CompletionClient,
    *,
    model_id: str = "default",
    digest_budget: int = DIGEST_BUDGET_CHARS,
) -> tuple[BeliefState, GroundingResult]:
    """Update the belief from revision 0 to revision 1.

    Raises GroundingEmpty when the model produced neither a valid chunk
    nor an approach; callers may proceed ungrounded but must record the
    event.
    """
    digest = render_metadata_digest(catalog, digest_budget)
    sop_text = catalog.sop_text()
    prompt = render_grounding_prompt(belief, digest, sop_text, query)
    # The validation context is exactly what sits between the prompt's
    # <context> tags, so the substring check never diverges from what the
    # model actually saw.
    context = prompt.split("<context>", 1)[1].split("</context>", 1)[0]

    response = gateway.complete(
        ChatRequest(system_text="", user_turns=[prompt], model_id=model_id, request_tag="grounding")
    )
    candidates, approach = parse_grounding_reply(response.text)
    accepted, rejected = verify_exact_chunks(candidates, context)
    for bad in rejected:
        log.warning("dropping non-verbatim chunk: %.80r", bad)

    if not accepted and not approach.strip():
        raise GroundingEmpty("grounding produced no valid chunks and no approach")

    chunks = [GroundedChunk(resolve_origin(c, catalog, digest), c) for c in accepted]
    result = GroundingResult(chunks=chunks, grounded_approach=approach.strip(), rejected=rejected)
    return belief.with_grounding(chunks, result.grounded_approach or None), result
