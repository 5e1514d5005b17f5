"""Bounded textual digest of a catalog for prompt context slots."""

from __future__ import annotations

from .types import MetadataCatalog, SourceProfile

MIN_DIGEST_BUDGET = 256

_SAMPLE_CHARS = 40


def _clean(value: str) -> str:
    value = value.replace("\r", " ").replace("\n", " ")
    if len(value) > _SAMPLE_CHARS:
        value = value[: _SAMPLE_CHARS - 1] + "…"
    return value


def _source_lines(profile: SourceProfile, detail: int) -> list[str]:
    d = profile.descriptor
    head = f"[source] {d.source_id} ({d.kind}"
    if d.declared_format:
        head += f", {d.declared_format}"
    head += f", {d.size_bytes} bytes"
    if profile.row_count is not None:
        head += f", {profile.row_count} rows"
        if profile.truncated:
            head += "+"
    if profile.doc_chunks is not None:
        head += f", {len(profile.doc_chunks)} chunks"
    head += ")"
    lines = [head]
    if not profile.columns or detail == 0:
        return lines
    if detail == 1:
        lines.append("  columns: " + ", ".join(c.name for c in profile.columns))
        return lines
    lines.append("  columns:")
    for col in profile.columns:
        row = (
            f"    - {col.name}: {col.inferred_type}, "
            f"nulls {col.null_count}/{profile.row_count}, distinct {col.distinct_count_estimate}"
        )
        if detail >= 3 and col.sample_values:
            row += ", samples: " + " | ".join(_clean(v) for v in col.sample_values)
        lines.append(row)
    return lines


def _render(catalog: MetadataCatalog, detail: int) -> str:
    lines = [
        f"Metadata catalog: {len(catalog.sources)} sources, {len(catalog.sops)} SOP documents."
    ]
    for profile in catalog.sources:
        lines.extend(_source_lines(profile, detail))
    if catalog.sops:
        lines.append("SOP documents:")
        for doc in catalog.sops:
            lines.append(f"  - {doc.doc_id}: {doc.title!r}, {len(doc.chunks)} chunks")
    return "\n".join(lines)


def render_metadata_digest(catalog: MetadataCatalog, budget_chars: int) -> str:
    """Deterministic human-readable catalog summary of at most budget_chars.

    Detail degrades in fixed steps when over budget: sample values are
    dropped first, then per-column detail, then column name lists; a hard
    prefix cut is the last resort.
    """
    if budget_chars < MIN_DIGEST_BUDGET:
        raise ValueError(f"budget_chars must be >= {MIN_DIGEST_BUDGET}")
    for detail in (3, 2, 1, 0):
        digest = _render(catalog, detail)
        if len(digest) <= budget_chars:
            return digest
    return _render(catalog, 0)[:budget_chars]
