"""Exception hierarchy shared by every pipeline module.

Each error carries a stable ``code`` string so the service layer and CLI can
map failures to structured payloads without string-matching messages.
"""

from __future__ import annotations


class StudioError(Exception):
    """Base class for all domain errors."""

    code = "StudioError"

    @property
    def message(self) -> str:
        return str(self)


class ValidationFailure(StudioError):
    """Input violates a documented precondition or type invariant."""

    code = "ValidationFailure"


class IllegalTransition(StudioError):
    """The (state, event) pair is outside the legal relation, or the
    resulting record would violate a state-implies-presence invariant."""

    code = "IllegalTransition"

    def __init__(self, state, event, reason: str | None = None):
        self.state = state
        self.event = event
        self.reason = reason
        detail = f" ({reason})" if reason else ""
        super().__init__(f"event {event} is not legal from state {state}{detail}")


class SeedOutOfBounds(StudioError):
    code = "SeedOutOfBounds"


class RegionTooLarge(StudioError):
    """Point segmentation flooded more than max_region_fraction of the image."""

    code = "RegionTooLarge"


class EmptyStrokes(StudioError):
    code = "EmptyStrokes"


class DimensionMismatch(StudioError):
    code = "DimensionMismatch"


class BackendUnavailable(StudioError):
    """A remote backend could not be reached or timed out."""

    code = "BackendUnavailable"


class MalformedBackendResponse(StudioError):
    """A remote backend answered, but not in the documented wire format."""

    code = "MalformedBackendResponse"


class EmptyRefinement(StudioError):
    """The LLM refiner returned a blank suggestion; callers fall back to the template."""

    code = "EmptyRefinement"


class StorageFailure(StudioError):
    code = "StorageFailure"


class SessionNotFound(StudioError):
    code = "SessionNotFound"


class SessionBusy(StudioError):
    """Another stage is already running for this session."""

    code = "SessionBusy"


class ParseFailure(StudioError):
    """A scenario or config document failed to parse; names the offending field."""

    code = "ParseFailure"

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"field '{field}': {detail}")


class UnknownBackend(StudioError):
    code = "UnknownBackend"

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown backend key '{key}'")


class StageError(StudioError):
    """Wraps a failure inside a pipeline stage with the stage name attached."""

    code = "StageError"

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
