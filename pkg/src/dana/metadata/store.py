"""Versioned catalog persistence. A load either yields a complete catalog
or raises; partial catalogs never escape."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import IoFailure, SchemaVersionMismatch
from .types import CATALOG_SCHEMA_VERSION, MetadataCatalog


def save_catalog(catalog: MetadataCatalog, path: str | Path) -> None:
    payload = {"schema_version": CATALOG_SCHEMA_VERSION, "catalog": catalog.to_dict()}
    try:
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoFailure(f"cannot write catalog to {path}: {exc}") from exc


def load_catalog(path: str | Path) -> MetadataCatalog:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read catalog from {path}: {exc}") from exc
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise IoFailure(f"catalog file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise SchemaVersionMismatch(f"catalog file {path} lacks a schema_version field")
    version = payload["schema_version"]
    if version != CATALOG_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"catalog file {path} has schema {version!r}, expected {CATALOG_SCHEMA_VERSION!r}"
        )
    try:
        return MetadataCatalog.from_dict(payload["catalog"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"catalog file {path} is structurally invalid: {exc}") from exc
