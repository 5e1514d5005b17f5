"""Offline metadata preparation: profiling, digests, and persistence."""

from .digest import MIN_DIGEST_BUDGET, render_metadata_digest
from .profiler import (
    chunk_text,
    create_metadata,
    discover_sources,
    infer_column_type,
    load_sop_document,
    profile_tabular,
)
from .store import load_catalog, save_catalog
from .types import (
    CATALOG_SCHEMA_VERSION,
    ColumnProfile,
    DataSourceDescriptor,
    MetadataCatalog,
    ProfileConfig,
    SOPChunk,
    SOPDocument,
    SourceProfile,
    catalogs_structurally_equal,
)

__all__ = [
    "CATALOG_SCHEMA_VERSION",
    "MIN_DIGEST_BUDGET",
    "ColumnProfile",
    "DataSourceDescriptor",
    "MetadataCatalog",
    "ProfileConfig",
    "SOPChunk",
    "SOPDocument",
    "SourceProfile",
    "catalogs_structurally_equal",
    "chunk_text",
    "create_metadata",
    "discover_sources",
    "infer_column_type",
    "load_catalog",
    "load_sop_document",
    "profile_tabular",
    "render_metadata_digest",
    "save_catalog",
]
