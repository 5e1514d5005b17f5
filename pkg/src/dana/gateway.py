"""Provider-agnostic model access with deterministic record/replay.

A Gateway resolves each ChatRequest either from a recorded cassette
(replay), from a live provider while persisting the exchange (record), or
straight through (passthrough). Fingerprints cover exactly the request
fields that determine the model's answer: model_id, system text, user
turns, and temperature. Tags and output-token budgets are excluded so
cassettes survive benign config drift.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import CassetteMiss, IoFailure, NoPayload, ProviderError

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 4096

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_S = 1.0


@dataclass
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}

    @classmethod
    def from_dict(cls, data: dict) -> "TokenUsage":
        return cls(int(data.get("input_tokens", 0)), int(data.get("output_tokens", 0)))


@dataclass
class ChatRequest:
    """One completion request: a system text plus ordered user turns."""

    system_text: str
    user_turns: list[str]
    model_id: str = "default"
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    request_tag: str = "untagged"

    def __post_init__(self) -> None:
        if not self.user_turns:
            raise ValueError("ChatRequest requires at least one user turn")
        if not self.request_tag:
            raise ValueError("ChatRequest requires a non-empty request_tag")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass
class ChatResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | error
    usage: TokenUsage = field(default_factory=TokenUsage)
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if self.finish_reason not in ("stop", "length", "error"):
            raise ValueError(f"invalid finish_reason {self.finish_reason!r}")
        if not self.text and self.finish_reason != "error":
            raise ValueError("empty response text is only valid with finish_reason=error")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "usage": self.usage.to_dict(),
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChatResponse":
        return cls(
            text=data["text"],
            finish_reason=data.get("finish_reason", "stop"),
            usage=TokenUsage.from_dict(data.get("usage", {})),
            latency_ms=int(data.get("latency_ms", 0)),
        )


def fingerprint(request: ChatRequest) -> str:
    """Stable hash of the answer-determining request fields.

    Insensitive to request_tag, max_output_tokens, and timing by contract.
    """
    canonical = json.dumps(
        [request.model_id, request.system_text, list(request.user_turns), request.temperature],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Cassette:
    """Append-friendly log of recorded exchanges, one JSON object per line.

    Reads are lock-free over an immutable snapshot taken at load; writes
    are serialized by an internal lock. Duplicate fingerprints in a file
    resolve last-wins on load.
    """

    MODES = ("record", "replay", "passthrough")

    def __init__(self, path: str | Path, mode: str = "replay"):
        if mode not in self.MODES:
            raise ValueError(f"invalid cassette mode {mode!r}")
        self.path: Path | None = Path(path)
        self.mode = mode
        self._entries: dict[str, ChatResponse] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            self._load()
        elif mode == "replay":
            raise IoFailure(f"cassette file not found: {self.path}")

    @classmethod
    def in_memory(cls, entries: dict[str, ChatResponse] | None = None, mode: str = "replay") -> "Cassette":
        """A file-less cassette, e.g. one reconstructed from a trace."""
        cassette = cls.__new__(cls)
        cassette.path = None
        cassette.mode = mode
        cassette._entries = dict(entries or {})
        cassette._lock = threading.Lock()
        return cassette

    def _load(self) -> None:
        assert self.path is not None
        try:
            raw = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read cassette {self.path}: {exc}") from exc
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                self._entries[entry["fingerprint"]] = ChatResponse.from_dict(entry["response"])
            except (ValueError, KeyError) as exc:
                raise IoFailure(f"bad cassette entry at {self.path}:{lineno}: {exc}") from exc

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, fp: str) -> ChatResponse | None:
        return self._entries.get(fp)

    def record(self, fp: str, response: ChatResponse, tag: str) -> None:
        with self._lock:
            if fp in self._entries and self._entries[fp] == response:
                return
            self._entries[fp] = response
            if self.path is None:
                return
            line = json.dumps(
                {"fingerprint": fp, "tag": tag, "response": response.to_dict()},
                ensure_ascii=False,
            )
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
                    handle.flush()
            except OSError as exc:
                raise IoFailure(f"cannot append to cassette {self.path}: {exc}") from exc


class Provider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class TransportFailure(Exception):
    """Retryable provider failure: connection trouble or a 5xx status."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class HttpProvider:
    """Minimal JSON-over-HTTP provider.

    Endpoint and credential come from DANA_PROVIDER_URL / DANA_PROVIDER_KEY
    unless passed explicitly. Expects a reply body with a ``text`` field.
    """

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, timeout_s: float = 120.0):
        self.endpoint = endpoint or os.environ.get("DANA_PROVIDER_URL", "")
        self.api_key = api_key or os.environ.get("DANA_PROVIDER_KEY", "")
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise ProviderError("no provider endpoint configured (DANA_PROVIDER_URL)")

    def complete(self, request: ChatRequest) -> ChatResponse:
        import urllib.error
        import urllib.request

        payload = json.dumps(
            {
                "model": request.model_id,
                "system": request.system_text,
                "messages": [{"role": "user", "content": turn} for turn in request.user_turns],
                "temperature": request.temperature,
                "max_tokens": request.max_output_tokens,
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint,
            data=payload,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        started = time.monotonic()
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as reply:
                body = json.loads(reply.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code >= 500:
                raise TransportFailure(f"provider HTTP {exc.code}", status=exc.code) from exc
            raise ProviderError(f"provider HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportFailure(f"provider transport error: {exc}") from exc
        latency = int((time.monotonic() - started) * 1000)
        usage = body.get("usage", {})
        return ChatResponse(
            text=body.get("text", ""),
            finish_reason=body.get("finish_reason", "stop"),
            usage=TokenUsage.from_dict(usage),
            latency_ms=latency,
        )


class Gateway:
    """Front door for all pipeline completions.

    Shareable across concurrent runs: replay lookups are read-only and
    cassette writes are serialized inside Cassette.
    """

    def __init__(
        self,
        provider: Provider | None = None,
        cassette: Cassette | None = None,
        *,
        attempts: int = RETRY_ATTEMPTS,
        backoff_s: float = RETRY_BACKOFF_S,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.cassette = cassette
        self.attempts = attempts
        self.backoff_s = backoff_s
        self._sleep = sleep
        self._calls = 0
        self._calls_lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return self._calls

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._calls_lock:
            self._calls += 1
        fp = fingerprint(request)
        if self.cassette is not None and self.cassette.mode == "replay":
            recorded = self.cassette.lookup(fp)
            if recorded is None:
                raise CassetteMiss(request.request_tag, fp)
            return recorded

        response = self._call_with_retries(request)
        if self.cassette is not None and self.cassette.mode == "record":
            # Persist before returning so a crash never loses the exchange.
            self.cassette.record(fp, response, request.request_tag)
        return response

    def _call_with_retries(self, request: ChatRequest) -> ChatResponse:
        if self.provider is None:
            raise ProviderError("no provider configured and request not served by cassette")
        delay = self.backoff_s
        last: TransportFailure | None = None
        for attempt in range(1, self.attempts + 1):
            try:
                return self.provider.complete(request)
            except TransportFailure as exc:
                last = exc
                log.warning("provider attempt %d/%d failed: %s", attempt, self.attempts, exc)
                if attempt < self.attempts:
                    self._sleep(delay)
                    delay *= 2
        raise ProviderError(f"provider failed after {self.attempts} attempts: {last}")


class CompletionClient(Protocol):
    """Anything the pipeline stages can ask for a completion."""

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class ExchangeCollector:
    """Gateway wrapper that records every request/response pair.

    The pipeline wraps the shared gateway with one collector per stage so
    traces can embed full prompts without the stage operations knowing
    about tracing.
    """

    def __init__(self, inner: CompletionClient):
        self.inner = inner
        self.exchanges: list[dict] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.exchanges.append(
            {
                "request": {
                    "system_text": request.system_text,
                    "user_turns": list(request.user_turns),
                    "model_id": request.model_id,
                    "temperature": request.temperature,
                    "max_output_tokens": request.max_output_tokens,
                    "request_tag": request.request_tag,
                },
                "response": response.to_dict(),
            }
        )
        return response

    def drain(self) -> list[dict]:
        exchanges, self.exchanges = self.exchanges, []
        return exchanges


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_json_payload(text: str):
    """Return the first parsable top-level JSON object found in model text.

    Search order: the whole text, then fenced code blocks, then
    balanced-brace spans scanned left to right. Raises NoPayload when no
    object parses anywhere.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            value = json.loads(stripped)
            if isinstance(value, dict):
                return value
        except ValueError:
            pass

    for block in _FENCE_RE.findall(text):
        candidate = block.strip()
        if not candidate.startswith("{"):
            continue
        try:
            value = json.loads(candidate)
            if isinstance(value, dict):
                return value
        except ValueError:
            continue

    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            value, _end = decoder.raw_decode(text, idx)
            if isinstance(value, dict):
                return value
        except ValueError:
            pass
        idx = text.find("{", idx + 1)

    raise NoPayload("no parsable JSON object in text")
