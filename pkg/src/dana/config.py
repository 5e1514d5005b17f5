"""Run configuration: everything a pipeline run needs, validated up front
and echoed into the trace for reproducibility."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UsageError
from .executor import ExecutorLimits
from .sandboxclient import SandboxLimits


@dataclass
class RunConfig:
    catalog_path: str = ""
    data_dir: str = ""
    sop_dir: str = ""
    instructions_path: str = ""
    model_id: str = "default"
    cassette_path: str = ""
    cassette_mode: str = "replay"  # record | replay | passthrough
    sandbox_cmd: list[str] = field(default_factory=list)
    sandbox_script: str = ""  # recorded ExecutionResults for a scripted session
    limits: ExecutorLimits = field(default_factory=ExecutorLimits)
    sandbox_limits: SandboxLimits = field(default_factory=SandboxLimits)
    trace_dir: str = "traces"
    out_dir: str = "out"
    digest_budget: int = 12_000

    def instructions_text(self) -> str:
        if not self.instructions_path:
            return ""
        return Path(self.instructions_path).read_text(encoding="utf-8")

    def validate(self, *, require_catalog: bool = True) -> None:
        """Check referenced paths before any stage runs."""
        if require_catalog:
            if not self.catalog_path:
                raise UsageError("no catalog configured (catalog_path)")
            if not Path(self.catalog_path).exists():
                raise UsageError(f"catalog not found: {self.catalog_path}")
        for label, value in (
            ("instructions_path", self.instructions_path),
            ("sandbox_script", self.sandbox_script),
        ):
            if value and not Path(value).exists():
                raise UsageError(f"{label} not found: {value}")
        if self.cassette_mode not in ("record", "replay", "passthrough"):
            raise UsageError(f"invalid cassette mode {self.cassette_mode!r}")
        if self.cassette_mode == "replay" and self.cassette_path and not Path(self.cassette_path).exists():
            raise UsageError(f"cassette not found: {self.cassette_path}")

    def to_dict(self) -> dict:
        return {
            "catalog_path": self.catalog_path,
            "data_dir": self.data_dir,
            "sop_dir": self.sop_dir,
            "instructions_path": self.instructions_path,
            "model_id": self.model_id,
            "cassette_path": self.cassette_path,
            "cassette_mode": self.cassette_mode,
            "sandbox_cmd": list(self.sandbox_cmd),
            "sandbox_script": self.sandbox_script,
            "limits": self.limits.to_dict(),
            "sandbox_limits": self.sandbox_limits.to_dict(),
            "trace_dir": self.trace_dir,
            "out_dir": self.out_dir,
            "digest_budget": self.digest_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        if "limits" in kwargs:
            kwargs["limits"] = ExecutorLimits.from_dict(kwargs["limits"])
        if "sandbox_limits" in kwargs:
            kwargs["sandbox_limits"] = SandboxLimits.from_dict(kwargs["sandbox_limits"])
        known = {f for f in cls().to_dict()}
        return cls(**{k: v for k, v in kwargs.items() if k in known})

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load config {path}: {exc}") from exc
