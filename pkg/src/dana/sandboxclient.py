"""Client side of the snippet-execution service.

The runner is a separate executable speaking newline-delimited JSON over
its stdio (one message per line). This module owns the wire types, a
subprocess-backed session, and a scripted fake so the whole pipeline can
run deterministically with recorded replies and no runner built.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import SandboxUnavailable, SessionDead, SpawnFailure, StartupTimeout
from .state import EXEC_STATUSES, ExecutionResult

OPS = ("exec", "reset", "ping", "shutdown")


@dataclass
class SandboxLimits:
    startup_s: float = 10.0
    timeout_s: float = 60.0
    stdout_cap: int = 16 * 1024
    stderr_cap: int = 16 * 1024
    memory_bytes: int = 2 * 1024 * 1024 * 1024

    def to_dict(self) -> dict:
        return {
            "startup_s": self.startup_s,
            "timeout_s": self.timeout_s,
            "stdout_cap": self.stdout_cap,
            "stderr_cap": self.stderr_cap,
            "memory_bytes": self.memory_bytes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SandboxLimits":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass
class ExecRequest:
    id: int
    op: str
    code: str | None = None
    timeout_s: float | None = None

    def __post_init__(self) -> None:
        if self.op not in OPS:
            raise ValueError(f"invalid op {self.op!r}")
        if self.op == "exec" and not self.code:
            raise ValueError("exec requests require code")

    def to_json_line(self) -> str:
        payload = {"id": self.id, "op": self.op}
        if self.code is not None:
            payload["code"] = self.code
        if self.timeout_s is not None:
            payload["timeout_s"] = self.timeout_s
        return json.dumps(payload, ensure_ascii=False)


@dataclass
class ExecReply:
    id: int
    status: str
    stdout: str = ""
    stderr: str = ""
    value_repr: str | None = None
    duration_ms: int = 0
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.status not in EXEC_STATUSES:
            raise ValueError(f"invalid reply status {self.status!r}")

    @classmethod
    def from_json_line(cls, line: str) -> "ExecReply":
        data = json.loads(line)
        return cls(
            id=int(data["id"]),
            status=data["status"],
            stdout=data.get("stdout", ""),
            stderr=data.get("stderr", ""),
            value_repr=data.get("value_repr"),
            duration_ms=int(data.get("duration_ms", 0)),
            truncated=bool(data.get("truncated", False)),
        )

    def to_result(self) -> ExecutionResult:
        return ExecutionResult(
            status=self.status,
            stdout=self.stdout,
            stderr=self.stderr,
            value_repr=self.value_repr,
            duration_ms=self.duration_ms,
            truncated=self.truncated,
        )


class Sandbox(Protocol):
    """What the execute loop needs from a snippet runner."""

    def execute(self, code: str, timeout_s: float | None = None) -> ExecutionResult: ...

    def reset(self) -> None: ...

    def close(self) -> None: ...


class NullSandbox:
    """Placeholder session for runs whose cassette scripts no code actions."""

    exec_count = 0

    def execute(self, code: str, timeout_s: float | None = None) -> ExecutionResult:
        raise SandboxUnavailable("no sandbox session configured for this run")

    def reset(self) -> None:
        pass

    def close(self) -> None:
        pass


class ScriptedSandbox:
    """Replays recorded ExecutionResults in order, one per execute call."""

    def __init__(self, replies: list[ExecutionResult]):
        self._replies = list(replies)
        self._cursor = 0
        self.exec_count = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedSandbox":
        replies = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                replies.append(ExecutionResult.from_dict(json.loads(line)))
        return cls(replies)

    def execute(self, code: str, timeout_s: float | None = None) -> ExecutionResult:
        if self._cursor >= len(self._replies):
            raise SessionDead(
                f"scripted sandbox exhausted after {len(self._replies)} replies"
            )
        reply = self._replies[self._cursor]
        self._cursor += 1
        self.exec_count += 1
        return reply

    def reset(self) -> None:
        pass

    def close(self) -> None:
        pass


class SubprocessSandbox:
    """A live session: one runner subprocess owned by one pipeline run.

    The supervisor side is callable from one thread at a time; a lock
    enforces that so misuse degrades into waiting instead of interleaved
    protocol corruption.
    """

    READ_GRACE_S = 5.0

    def __init__(
        self,
        command: list[str],
        working_dir: str | Path,
        allowed_data_paths: list[str | Path],
        limits: SandboxLimits | None = None,
    ):
        self.limits = limits or SandboxLimits()
        self.working_dir = Path(working_dir)
        if not self.working_dir.is_dir():
            raise SpawnFailure(f"working dir does not exist: {self.working_dir}")
        # The limits file lives outside the working dir: the working dir
        # is the user's data directory and must stay pristine.
        fd, limits_path = tempfile.mkstemp(prefix="sandbox-limits-", suffix=".json")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(self.limits.to_dict()))
        self._limits_file = Path(limits_path)

        argv = list(command) + ["--working-dir", str(self.working_dir)]
        for path in allowed_data_paths:
            argv += ["--allow", str(path)]
        argv += ["--limits", str(self._limits_file)]

        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot launch sandbox runner {command!r}: {exc}") from exc

        self._next_id = 1
        self._lock = threading.Lock()
        self.exec_count = 0
        self._closed = False
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._reader.start()
        self._handshake()

    def _pump_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _handshake(self) -> None:
        deadline = time.monotonic() + self.limits.startup_s
        try:
            reply = self._roundtrip("ping", read_deadline=deadline)
        except SessionDead as exc:
            self.close()
            raise StartupTimeout(f"runner did not answer ping in {self.limits.startup_s}s: {exc}") from exc
        if reply.status != "ok":
            self.close()
            raise StartupTimeout(f"runner ping failed: {reply.stderr or reply.status}")

    def _roundtrip(
        self,
        op: str,
        code: str | None = None,
        timeout_s: float | None = None,
        read_deadline: float | None = None,
    ) -> ExecReply:
        with self._lock:
            if self._closed or self._proc.poll() is not None:
                raise SessionDead("sandbox runner process is gone")
            request = ExecRequest(id=self._next_id, op=op, code=code, timeout_s=timeout_s)
            self._next_id += 1
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(request.to_json_line() + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise SessionDead(f"sandbox stdin broken: {exc}") from exc

            if read_deadline is None:
                budget = (timeout_s or self.limits.timeout_s) + self.READ_GRACE_S
                read_deadline = time.monotonic() + budget
            return self._read_reply(request.id, read_deadline)

    def _read_reply(self, request_id: int, deadline: float) -> ExecReply:
        # Replies arrive in request order; anything else is a protocol break.
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SessionDead(f"no reply for request {request_id} before deadline")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise SessionDead(f"no reply for request {request_id} before deadline")
            if line is None:
                raise SessionDead("sandbox runner closed its stdout")
            line = line.strip()
            if not line:
                continue
            try:
                reply = ExecReply.from_json_line(line)
            except (ValueError, KeyError) as exc:
                raise SessionDead(f"unparseable sandbox reply: {exc}") from exc
            if reply.id != request_id:
                raise SessionDead(
                    f"out-of-order sandbox reply: got {reply.id}, wanted {request_id}"
                )
            return reply

    def execute(self, code: str, timeout_s: float | None = None) -> ExecutionResult:
        reply = self._roundtrip("exec", code=code, timeout_s=timeout_s or self.limits.timeout_s)
        self.exec_count += 1
        return reply.to_result()

    def reset(self) -> None:
        self._roundtrip("reset")

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.poll() is None and self._proc.stdin is not None:
                self._proc.stdin.write(
                    ExecRequest(id=self._next_id, op="shutdown").to_json_line() + "\n"
                )
                self._proc.stdin.flush()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=3)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait(timeout=3)
        self._limits_file.unlink(missing_ok=True)


def start_session(
    command: list[str],
    working_dir: str | Path,
    allowed_data_paths: list[str | Path],
    limits: SandboxLimits | None = None,
) -> SubprocessSandbox:
    """Launch a runner subprocess and verify liveness within the startup
    budget."""
    return SubprocessSandbox(command, working_dir, allowed_data_paths, limits)
