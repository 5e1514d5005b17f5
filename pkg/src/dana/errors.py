"""Exception hierarchy shared across the pipeline.

Every failure class that maps to a CLI exit code or a bench failure
class lives here so callers can catch by family.
"""

from __future__ import annotations


class DanaError(Exception):
    """Base class for all package errors."""


# --- metadata preparation ---------------------------------------------------

class UnreadableSource(DanaError):
    pass


class MalformedTabular(DanaError):
    pass


class EmptySource(DanaError):
    pass


class IoFailure(DanaError):
    pass


class SchemaVersionMismatch(DanaError):
    pass


# --- model gateway ----------------------------------------------------------

class GatewayError(DanaError):
    """Family for all model-access failures."""


class ProviderError(GatewayError):
    pass


class CassetteMiss(GatewayError):
    def __init__(self, request_tag: str, fingerprint: str):
        super().__init__(
            f"no cassette entry for request tagged {request_tag!r} "
            f"(fingerprint {fingerprint[:12]}...)"
        )
        self.request_tag = request_tag
        self.fingerprint = fingerprint


class NoPayload(DanaError):
    """No parsable JSON object anywhere in a model reply."""


# --- prompt assets ----------------------------------------------------------

class MissingPromptAsset(DanaError):
    pass


class UnfilledPlaceholder(DanaError):
    pass


# --- stage parsing ----------------------------------------------------------

class ParseError(DanaError):
    """Family for model replies that do not meet a stage contract."""


class UnparseableBelief(ParseError):
    pass


class GroundingEmpty(DanaError):
    """Model produced neither a valid chunk nor an approach; callers may
    proceed ungrounded but must record the event."""


class UnparseablePlan(ParseError):
    pass


class PlanTooLarge(ParseError):
    pass


class UnparseableExecutorReply(ParseError):
    pass


class InconsistentDecision(ParseError):
    """plan_status completed without a final_answer action."""


# --- execution --------------------------------------------------------------

class IterationBudgetExhausted(DanaError):
    pass


class SandboxError(DanaError):
    """Family for sandbox transport/lifecycle failures."""


class SandboxUnavailable(SandboxError):
    pass


class SpawnFailure(SandboxError):
    pass


class StartupTimeout(SandboxError):
    pass


class SessionDead(SandboxError):
    pass


# --- answer formatting ------------------------------------------------------

class FormatMismatch(DanaError):
    def __init__(self, message: str, raw):
        super().__init__(message)
        self.raw = raw


# --- benchmark harness ------------------------------------------------------

class SuiteUnreadable(DanaError):
    pass


class MalformedRecord(DanaError):
    pass


class DuplicateTask(DanaError):
    pass


# --- trace store ------------------------------------------------------------

class SequenceGap(DanaError):
    pass


class RunNotFound(DanaError):
    pass


class UsageError(DanaError):
    pass
