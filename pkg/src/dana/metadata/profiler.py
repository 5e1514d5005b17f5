"""Offline profiling of raw data sources and SOP documents into a catalog."""

from __future__ import annotations

import csv
import io
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, timezone
from pathlib import Path

from ..errors import EmptySource, MalformedTabular, UnreadableSource
from .types import (
    ColumnProfile,
    DataSourceDescriptor,
    MetadataCatalog,
    ProfileConfig,
    SOPChunk,
    SOPDocument,
    SourceProfile,
)

# Share of non-null cells that must parse for a numeric/boolean/temporal call.
TYPE_THRESHOLD = 0.99

_TABULAR_SUFFIXES = {".csv": "csv", ".tsv": "tsv"}
_DOCUMENT_SUFFIXES = {".md", ".txt", ".rst"}
_NON_FINITE = {"nan", "inf", "-inf", "+inf", "infinity", "-infinity"}
_PARAGRAPH_SEP_RE = re.compile(r"(\n[ \t]*\n+)")


def discover_sources(data_dir: str | Path) -> list[DataSourceDescriptor]:
    """Describe every regular file under a directory, sorted by relative path."""
    root = Path(data_dir)
    if not root.is_dir():
        raise UnreadableSource(f"data directory not found: {root}")
    descriptors = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        relative = path.relative_to(root)
        # Hidden entries are tooling artifacts (editor droppings, sandbox
        # scratch dirs), not data sources.
        if any(part.startswith(".") for part in relative.parts):
            continue
        suffix = path.suffix.lower()
        if suffix in _TABULAR_SUFFIXES:
            kind, declared = "tabular", _TABULAR_SUFFIXES[suffix]
        elif suffix in _DOCUMENT_SUFFIXES:
            kind, declared = "document", "text"
        else:
            kind, declared = "other", "binary"
        descriptors.append(
            DataSourceDescriptor(
                source_id=relative.as_posix(),
                path=str(path),
                kind=kind,
                size_bytes=path.stat().st_size,
                declared_format=declared,
            )
        )
    return descriptors


def _read_text(path: Path, what: str) -> str:
    try:
        data = path.read_bytes()
    except FileNotFoundError as exc:
        raise UnreadableSource(f"{what} not found: {path}") from exc
    except PermissionError as exc:
        raise UnreadableSource(f"{what} not readable: {path}") from exc
    except OSError as exc:
        raise UnreadableSource(f"{what} unreadable: {path}: {exc}") from exc
    if len(data) == 0:
        raise EmptySource(f"{what} is empty: {path}")
    return data.decode("utf-8", errors="replace")


def _is_integer(cell: str) -> bool:
    try:
        int(cell.strip())
        return True
    except ValueError:
        return False


def _is_real(cell: str) -> bool:
    token = cell.strip().lower()
    if token in _NON_FINITE:
        return False
    try:
        float(token)
        return True
    except ValueError:
        return False


def _is_boolean(cell: str) -> bool:
    return cell.strip().lower() in ("true", "false")


def _is_temporal(cell: str) -> bool:
    token = cell.strip()
    for parser in (date.fromisoformat, datetime.fromisoformat):
        try:
            parser(token)
            return True
        except ValueError:
            continue
    return False


def infer_column_type(non_null_cells: list[str]) -> str:
    """Classify a column from its non-null cells.

    A numeric/boolean/temporal call requires >= 99% of cells to parse,
    which tolerates a stray annotation without a full-scan cost. A column
    with no non-null cells is unknown; anything else is text.
    """
    if not non_null_cells:
        return "unknown"
    total = len(non_null_cells)
    for type_name, predicate in (
        ("boolean", _is_boolean),
        ("integer", _is_integer),
        ("real", _is_real),
        ("temporal", _is_temporal),
    ):
        hits = sum(1 for cell in non_null_cells if predicate(cell))
        if hits / total >= TYPE_THRESHOLD:
            return type_name
    return "text"


def _sniff_delimiter(sample: str, declared_format: str) -> str:
    if declared_format == "tsv":
        return "\t"
    try:
        return csv.Sniffer().sniff(sample, delimiters=",;\t|").delimiter
    except csv.Error:
        return ","


def profile_tabular(descriptor: DataSourceDescriptor, config: ProfileConfig) -> SourceProfile:
    text = _read_text(Path(descriptor.path), f"source {descriptor.source_id}")
    delimiter = _sniff_delimiter(text[:8192], descriptor.declared_format)
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedTabular(f"{descriptor.source_id}: no header row")
    names = [name.strip() for name in header]
    if not names or any(not name for name in names):
        raise MalformedTabular(f"{descriptor.source_id}: empty column name in header")
    if len(names) != len(set(names)):
        raise MalformedTabular(f"{descriptor.source_id}: duplicate column names in header")

    cells_by_col: list[list[str]] = [[] for _ in names]
    row_count = 0
    truncated = False
    for row in reader:
        if row_count >= config.max_profile_rows:
            truncated = True
            break
        row_count += 1
        for i in range(len(names)):
            cells_by_col[i].append(row[i] if i < len(row) else "")

    columns = []
    for name, cells in zip(names, cells_by_col):
        non_null = [cell for cell in cells if cell != ""]
        samples: list[str] = []
        seen: set[str] = set()
        for cell in non_null:
            if cell not in seen:
                seen.add(cell)
                samples.append(cell)
            if len(samples) >= config.sample_k:
                break
        columns.append(
            ColumnProfile(
                name=name,
                inferred_type=infer_column_type(non_null),
                null_count=len(cells) - len(non_null),
                distinct_count_estimate=len(set(cells) - {""}),
                sample_values=samples,
            )
        )
    return SourceProfile(descriptor=descriptor, row_count=row_count, columns=columns, truncated=truncated)


def chunk_text(body: str, chunk_chars: int) -> list[tuple[str, tuple[int, int]]]:
    """Split text at blank-line paragraph boundaries, greedily merged up to
    chunk_chars. Paragraph separators stay attached to the preceding
    paragraph so concatenating the chunks reconstructs the body exactly.
    Oversized single paragraphs are hard-sliced at chunk_chars.
    """
    parts = _PARAGRAPH_SEP_RE.split(body)
    paragraphs = []
    for i in range(0, len(parts), 2):
        separator = parts[i + 1] if i + 1 < len(parts) else ""
        merged = parts[i] + separator
        if merged:
            paragraphs.append(merged)

    pieces = []
    for paragraph in paragraphs:
        while len(paragraph) > chunk_chars:
            pieces.append(paragraph[:chunk_chars])
            paragraph = paragraph[chunk_chars:]
        if paragraph:
            pieces.append(paragraph)

    chunks: list[str] = []
    current = ""
    for piece in pieces:
        if current and len(current) + len(piece) > chunk_chars:
            chunks.append(current)
            current = piece
        else:
            current += piece
    if current:
        chunks.append(current)

    spans = []
    offset = 0
    for chunk in chunks:
        spans.append((chunk, (offset, offset + len(chunk))))
        offset += len(chunk)
    return spans


def _document_title(body: str, fallback: str) -> str:
    for line in body.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            return stripped.lstrip("#").strip() or fallback
        if stripped:
            return stripped[:80]
    return fallback


def load_sop_document(path: str | Path, config: ProfileConfig) -> SOPDocument:
    path = Path(path)
    body = _read_text(path, f"SOP {path.name}")
    doc_id = path.stem
    chunks = [
        SOPChunk(chunk_id=f"{doc_id}#{i}", text=text, char_span=span)
        for i, (text, span) in enumerate(chunk_text(body, config.chunk_chars))
    ]
    return SOPDocument(doc_id=doc_id, title=_document_title(body, doc_id), chunks=chunks)


def _profile_one(descriptor: DataSourceDescriptor, config: ProfileConfig) -> SourceProfile:
    if descriptor.kind == "tabular":
        return profile_tabular(descriptor, config)
    if descriptor.kind == "document":
        body = _read_text(Path(descriptor.path), f"source {descriptor.source_id}")
        inventory = [
            {"chunk_id": f"{descriptor.source_id}#{i}", "char_span": list(span)}
            for i, (_text, span) in enumerate(chunk_text(body, config.chunk_chars))
        ]
        return SourceProfile(descriptor=descriptor, doc_chunks=inventory)
    # "other" sources are catalogued but not opened.
    return SourceProfile(descriptor=descriptor)


def create_metadata(
    sources: list[DataSourceDescriptor],
    sop_paths: list[str | Path],
    config: ProfileConfig | None = None,
) -> MetadataCatalog:
    """Profile data sources and SOPs into an immutable catalog.

    Distinct sources are profiled in parallel; assembly preserves the
    input order, so two runs over identical bytes yield identical
    catalogs apart from created_at.
    """
    config = config or ProfileConfig()
    if len(sources) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(sources))) as pool:
            profiles = list(pool.map(lambda d: _profile_one(d, config), sources))
    else:
        profiles = [_profile_one(d, config) for d in sources]
    sops = [load_sop_document(p, config) for p in sop_paths]
    return MetadataCatalog(
        sources=profiles,
        sops=sops,
        created_at=datetime.now(timezone.utc).isoformat(),
        profile_config=config,
    )
