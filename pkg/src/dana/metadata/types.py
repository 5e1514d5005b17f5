"""Catalog domain types produced by the offline profiling step."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

SOURCE_KINDS = ("tabular", "document", "other")
COLUMN_TYPES = ("integer", "real", "text", "boolean", "temporal", "unknown")

CATALOG_SCHEMA_VERSION = "dana.catalog.v1"


@dataclass
class ProfileConfig:
    """Caps that keep the offline profiling step bounded."""

    sample_k: int = 5
    max_profile_rows: int = 10_000
    chunk_chars: int = 2_000

    def __post_init__(self) -> None:
        if self.sample_k < 1:
            raise ValueError("sample_k must be >= 1")
        if self.max_profile_rows < 1:
            raise ValueError("max_profile_rows must be >= 1")
        if self.chunk_chars < 1:
            raise ValueError("chunk_chars must be >= 1")

    def to_dict(self) -> dict:
        return {
            "sample_k": self.sample_k,
            "max_profile_rows": self.max_profile_rows,
            "chunk_chars": self.chunk_chars,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProfileConfig":
        return cls(**data)


@dataclass
class DataSourceDescriptor:
    source_id: str
    path: str
    kind: str  # tabular | document | other
    size_bytes: int = 0
    declared_format: str = ""

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError("path must be non-empty")
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"invalid source kind {self.kind!r}")
        if self.size_bytes < 0:
            raise ValueError("size_bytes must be >= 0")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "path": self.path,
            "kind": self.kind,
            "size_bytes": self.size_bytes,
            "declared_format": self.declared_format,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DataSourceDescriptor":
        return cls(**data)


@dataclass
class ColumnProfile:
    name: str
    inferred_type: str
    null_count: int
    distinct_count_estimate: int
    sample_values: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.inferred_type not in COLUMN_TYPES:
            raise ValueError(f"invalid column type {self.inferred_type!r}")
        if self.null_count < 0 or self.distinct_count_estimate < 0:
            raise ValueError("counts must be >= 0")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inferred_type": self.inferred_type,
            "null_count": self.null_count,
            "distinct_count_estimate": self.distinct_count_estimate,
            "sample_values": list(self.sample_values),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnProfile":
        return cls(**data)


@dataclass
class SOPChunk:
    chunk_id: str
    text: str
    char_span: tuple[int, int]

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "text": self.text, "char_span": list(self.char_span)}

    @classmethod
    def from_dict(cls, data: dict) -> "SOPChunk":
        return cls(data["chunk_id"], data["text"], tuple(data["char_span"]))


@dataclass
class SOPDocument:
    doc_id: str
    title: str
    chunks: list[SOPChunk] = field(default_factory=list)

    @property
    def body(self) -> str:
        return "".join(chunk.text for chunk in self.chunks)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "chunks": [c.to_dict() for c in self.chunks],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SOPDocument":
        return cls(data["doc_id"], data["title"], [SOPChunk.from_dict(c) for c in data["chunks"]])


@dataclass
class SourceProfile:
    descriptor: DataSourceDescriptor
    row_count: int | None = None
    columns: list[ColumnProfile] = field(default_factory=list)
    doc_chunks: list[dict] | None = None  # {chunk_id, char_span} inventory for documents
    truncated: bool = False  # profiling hit max_profile_rows before EOF

    def to_dict(self) -> dict:
        return {
            "descriptor": self.descriptor.to_dict(),
            "row_count": self.row_count,
            "columns": [c.to_dict() for c in self.columns],
            "doc_chunks": self.doc_chunks,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourceProfile":
        return cls(
            descriptor=DataSourceDescriptor.from_dict(data["descriptor"]),
            row_count=data.get("row_count"),
            columns=[ColumnProfile.from_dict(c) for c in data.get("columns", [])],
            doc_chunks=data.get("doc_chunks"),
            truncated=data.get("truncated", False),
        )


@dataclass
class MetadataCatalog:
    sources: list[SourceProfile] = field(default_factory=list)
    sops: list[SOPDocument] = field(default_factory=list)
    created_at: str = ""
    profile_config: ProfileConfig = field(default_factory=ProfileConfig)

    def __post_init__(self) -> None:
        ids = [s.descriptor.source_id for s in self.sources]
        if len(ids) != len(set(ids)):
            raise ValueError("source_id values must be unique within a catalog")

    def source_ids(self) -> list[str]:
        return [s.descriptor.source_id for s in self.sources]

    def file_paths(self) -> list[str]:
        return [s.descriptor.path for s in self.sources]

    def sop_text(self) -> str:
        """All SOP bodies concatenated, in catalog order, for prompt context."""
        return "\n\n".join(doc.body for doc in self.sops)

    def to_dict(self) -> dict:
        return {
            "sources": [s.to_dict() for s in self.sources],
            "sops": [d.to_dict() for d in self.sops],
            "created_at": self.created_at,
            "profile_config": self.profile_config.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetadataCatalog":
        return cls(
            sources=[SourceProfile.from_dict(s) for s in data["sources"]],
            sops=[SOPDocument.from_dict(d) for d in data["sops"]],
            created_at=data.get("created_at", ""),
            profile_config=ProfileConfig.from_dict(data["profile_config"]),
        )

    def fingerprint(self) -> str:
        """Content hash over everything except the creation timestamp."""
        payload = self.to_dict()
        payload.pop("created_at", None)
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def catalogs_structurally_equal(a: MetadataCatalog, b: MetadataCatalog) -> bool:
    """Equality with creation timestamps excluded."""
    return a.fingerprint() == b.fingerprint()
