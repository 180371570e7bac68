"""Domain types, the session state machine, and record validation.

Everything here is an immutable value; operations are pure functions, so
records can be shared freely between threads without synchronization.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import IllegalTransition, ValidationFailure


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


# ---------------------------------------------------------------------------
# Raster types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Fixed-size 8-bit RGB pixel grid; the unit every stage consumes and produces.

    ``pixels`` is a read-only (height, width, 3) uint8 array in row-major order.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationFailure("image pixels must have shape (height, width, 3)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationFailure("image dimensions must be at least 1x1")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValidationFailure("image channels must be integers")
            if arr.min() < 0 or arr.max() > 255:
                raise ValidationFailure("image channels must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(b"rgb8")
        h.update(f"{self.width}x{self.height}".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel 0/1 raster marking the region to correct (1) vs. preserve (0).

    ``bits`` is a read-only (height, width) uint8 array with values in {0, 1}.
    """

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype == np.bool_:
            arr = arr.astype(np.uint8)
        if arr.ndim != 2:
            raise ValidationFailure("mask bits must have shape (height, width)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationFailure("mask dimensions must be at least 1x1")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationFailure("mask bits must be integers")
        if not np.isin(arr, (0, 1)).all():
            raise ValidationFailure("mask bits must be strictly 0 or 1")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=np.uint8))

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def area(self) -> int:
        return int(self.bits.sum())

    def to_bool(self) -> np.ndarray:
        return self.bits.astype(bool)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(b"mask1")
        h.update(f"{self.width}x{self.height}".encode())
        h.update(self.bits.tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area()})"


# ---------------------------------------------------------------------------
# Mask seeds (user gestures)
# ---------------------------------------------------------------------------


class SeedKind(str, Enum):
    POINT = "point"
    BOX = "box"
    STROKES = "strokes"


@dataclass(frozen=True)
class Stroke:
    """One painted polyline with a disc brush of the given radius.

    The rasterizer accepts radius >= 0; gesture seeds (MaskSeed) require >= 1.
    """

    points: tuple[tuple[int, int], ...]
    radius: int

    def __post_init__(self):
        if not self.points:
            raise ValidationFailure("stroke must contain at least one point")
        if self.radius < 0:
            raise ValidationFailure("brush radius must be >= 0")
        object.__setattr__(
            self, "points", tuple((int(x), int(y)) for x, y in self.points)
        )


@dataclass(frozen=True)
class MaskSeed:
    """User gesture from which a mask is produced: a point, a box, or strokes."""

    kind: SeedKind
    point: tuple[int, int] | None = None
    box: tuple[int, int, int, int] | None = None
    strokes: tuple[Stroke, ...] = ()

    @classmethod
    def from_point(cls, x: int, y: int) -> "MaskSeed":
        return cls(kind=SeedKind.POINT, point=(int(x), int(y)))

    @classmethod
    def from_box(cls, x0: int, y0: int, x1: int, y1: int) -> "MaskSeed":
        return cls(kind=SeedKind.BOX, box=(int(x0), int(y0), int(x1), int(y1)))

    @classmethod
    def from_strokes(cls, strokes: Iterable[Stroke]) -> "MaskSeed":
        return cls(kind=SeedKind.STROKES, strokes=tuple(strokes))

    def validate_for(self, width: int, height: int) -> None:
        """Raise ValidationFailure unless the gesture fits an image of the given size."""

        def in_bounds(x: int, y: int) -> bool:
            return 0 <= x < width and 0 <= y < height

        if self.kind == SeedKind.POINT:
            if self.point is None:
                raise ValidationFailure("point seed requires a point")
            if not in_bounds(*self.point):
                raise ValidationFailure(f"seed point {self.point} outside {width}x{height}")
        elif self.kind == SeedKind.BOX:
            if self.box is None:
                raise ValidationFailure("box seed requires a box")
            x0, y0, x1, y1 = self.box
            if x0 > x1 or y0 > y1:
                raise ValidationFailure("box must satisfy x0 <= x1 and y0 <= y1")
            if not (in_bounds(x0, y0) and in_bounds(x1, y1)):
                raise ValidationFailure(f"box {self.box} outside {width}x{height}")
        elif self.kind == SeedKind.STROKES:
            if not self.strokes:
                raise ValidationFailure("strokes seed requires at least one stroke")
            for stroke in self.strokes:
                if stroke.radius < 1:
                    raise ValidationFailure("gesture brush radius must be >= 1")
                for x, y in stroke.points:
                    if not in_bounds(x, y):
                        raise ValidationFailure(
                            f"stroke point ({x}, {y}) outside {width}x{height}"
                        )
        else:  # pragma: no cover - enum exhausted
            raise ValidationFailure(f"unknown seed kind {self.kind}")

    def to_dict(self) -> dict:
        payload: dict = {"kind": self.kind.value}
        if self.kind == SeedKind.POINT:
            payload["point"] = list(self.point)
        elif self.kind == SeedKind.BOX:
            payload["box"] = list(self.box)
        else:
            payload["strokes"] = [
                {"points": [list(p) for p in s.points], "radius": s.radius}
                for s in self.strokes
            ]
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "MaskSeed":
        try:
            kind = SeedKind(payload["kind"])
        except (KeyError, ValueError) as exc:
            raise ValidationFailure(f"bad seed kind: {exc}") from exc
        if kind == SeedKind.POINT:
            x, y = payload["point"]
            return cls.from_point(x, y)
        if kind == SeedKind.BOX:
            x0, y0, x1, y1 = payload["box"]
            return cls.from_box(x0, y0, x1, y1)
        strokes = [
            Stroke(points=tuple((int(x), int(y)) for x, y in s["points"]), radius=int(s["radius"]))
            for s in payload.get("strokes", [])
        ]
        if not strokes:
            raise ValidationFailure("strokes seed requires at least one stroke")
        return cls.from_strokes(strokes)


# ---------------------------------------------------------------------------
# Prompts and scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptRecord:
    """Prompts attached to one correction session.

    ``suggested_prompt`` keeps the refiner's raw suggestion alongside the final
    refined prompt actually used, which may be a user edit of it.
    """

    initial_prompt: str
    target_description: str
    refined_prompt: str | None = None
    suggested_prompt: str | None = None


@dataclass(frozen=True)
class ScoreReport:
    """Initial vs. inpainted text-image similarity pair for one comparison."""

    prompt_used: str
    initial_score: float
    inpainted_score: float
    delta: float
    embedder_id: str

    @classmethod
    def build(
        cls, prompt_used: str, initial_score: float, inpainted_score: float, embedder_id: str
    ) -> "ScoreReport":
        return cls(
            prompt_used=prompt_used,
            initial_score=float(initial_score),
            inpainted_score=float(inpainted_score),
            delta=float(inpainted_score) - float(initial_score),
            embedder_id=embedder_id,
        )


# ---------------------------------------------------------------------------
# Session state machine
# ---------------------------------------------------------------------------


class SessionState(str, Enum):
    CREATED = "Created"
    GENERATED = "Generated"
    MASKED = "Masked"
    REFINED = "Refined"
    INPAINTED = "Inpainted"
    SCORED = "Scored"


class SessionEvent(str, Enum):
    IMAGE_GENERATED = "ImageGenerated"
    MASK_SET = "MaskSet"
    PROMPT_REFINED = "PromptRefined"
    INPAINTED = "Inpainted"
    SCORED = "Scored"
    RESTART_MASK = "RestartMask"


#: The legal transition relation. Scored -> Masked (RestartMask) supports the
#: iterate-on-the-same-base-image loop; Masked -> Masked allows re-masking.
TRANSITIONS: dict[tuple[SessionState, SessionEvent], SessionState] = {
    (SessionState.CREATED, SessionEvent.IMAGE_GENERATED): SessionState.GENERATED,
    (SessionState.GENERATED, SessionEvent.MASK_SET): SessionState.MASKED,
    (SessionState.MASKED, SessionEvent.MASK_SET): SessionState.MASKED,
    (SessionState.MASKED, SessionEvent.PROMPT_REFINED): SessionState.REFINED,
    (SessionState.REFINED, SessionEvent.INPAINTED): SessionState.INPAINTED,
    (SessionState.INPAINTED, SessionEvent.SCORED): SessionState.SCORED,
    (SessionState.SCORED, SessionEvent.RESTART_MASK): SessionState.MASKED,
}


@dataclass(frozen=True)
class HistoryEntry:
    timestamp: datetime
    from_state: SessionState
    to_state: SessionState
    actor: str


@dataclass(frozen=True)
class SessionRecord:
    """One correction workflow: prompts, stage artifacts, scores, and history."""

    session_id: str
    state: SessionState
    prompts: PromptRecord
    seed: int
    created_at: datetime
    updated_at: datetime
    initial_image: RasterImage | None = None
    mask: BinaryMask | None = None
    mask_seed: MaskSeed | None = None
    inpainted_image: RasterImage | None = None
    score_report: ScoreReport | None = None
    history: tuple[HistoryEntry, ...] = ()

    @classmethod
    def create(
        cls,
        session_id: str,
        initial_prompt: str,
        target_description: str,
        seed: int,
        now: datetime | None = None,
    ) -> "SessionRecord":
        if not initial_prompt.strip():
            raise ValidationFailure("initial_prompt must be non-empty")
        if not target_description.strip():
            raise ValidationFailure("target_description must be non-empty")
        ts = now if now is not None else utc_now()
        return cls(
            session_id=session_id,
            state=SessionState.CREATED,
            prompts=PromptRecord(
                initial_prompt=initial_prompt, target_description=target_description
            ),
            seed=int(seed),
            created_at=ts,
            updated_at=ts,
        )


@dataclass(frozen=True)
class Violation:
    """One structured invariant violation found by validate_session."""

    code: str
    field: str
    message: str


_STATE_REQUIRES: dict[SessionState, str] = {
    SessionState.GENERATED: "initial_image",
    SessionState.MASKED: "mask",
    SessionState.INPAINTED: "inpainted_image",
    SessionState.SCORED: "score_report",
}

_REFINED_STATES = frozenset(
    {SessionState.REFINED, SessionState.INPAINTED, SessionState.SCORED}
)


def validate_session(record: SessionRecord) -> list[Violation]:
    """Return every invariant violation as structured code + message.

    An empty list means the record satisfies all SessionRecord invariants.
    Violations are return values, never exceptions.
    """
    violations: list[Violation] = []

    if not record.prompts.initial_prompt.strip():
        violations.append(
            Violation("EmptyPrompt", "prompts.initial_prompt", "initial prompt is empty")
        )

    required = _STATE_REQUIRES.get(record.state)
    if required is not None and getattr(record, required) is None:
        violations.append(
            Violation(
                "MissingArtifact",
                required,
                f"state {record.state.value} requires {required}",
            )
        )
    if record.state in _REFINED_STATES and not (record.prompts.refined_prompt or "").strip():
        violations.append(
            Violation(
                "MissingArtifact",
                "prompts.refined_prompt",
                f"state {record.state.value} requires a non-empty refined prompt",
            )
        )

    if record.mask is not None and record.initial_image is not None:
        if record.mask.size != record.initial_image.size:
            violations.append(
                Violation(
                    "DimensionMismatch",
                    "mask",
                    f"mask {record.mask.width}x{record.mask.height} does not match "
                    f"image {record.initial_image.width}x{record.initial_image.height}",
                )
            )

    if record.score_report is not None:
        report = record.score_report
        if report.delta != report.inpainted_score - report.initial_score:
            violations.append(
                Violation(
                    "InconsistentDelta",
                    "score_report.delta",
                    "delta must equal inpainted_score - initial_score exactly",
                )
            )

    violations.extend(_validate_history(record))
    return violations


def _validate_history(record: SessionRecord) -> list[Violation]:
    violations: list[Violation] = []
    history = record.history
    if not history:
        if record.state != SessionState.CREATED:
            violations.append(
                Violation(
                    "IllegalHistory",
                    "history",
                    f"state {record.state.value} is unreachable with empty history",
                )
            )
        return violations

    if history[0].from_state != SessionState.CREATED:
        violations.append(
            Violation("IllegalHistory", "history", "history must start from Created")
        )
    for i, entry in enumerate(history):
        legal_targets = {
            to for (frm, _), to in TRANSITIONS.items() if frm == entry.from_state
        }
        if entry.to_state not in legal_targets:
            violations.append(
                Violation(
                    "IllegalHistory",
                    f"history[{i}]",
                    f"{entry.from_state.value} -> {entry.to_state.value} is not a legal step",
                )
            )
        if i + 1 < len(history) and history[i + 1].from_state != entry.to_state:
            violations.append(
                Violation(
                    "IllegalHistory",
                    f"history[{i + 1}]",
                    "history entries do not chain",
                )
            )
    if history[-1].to_state != record.state:
        violations.append(
            Violation(
                "IllegalHistory",
                "history",
                f"history ends at {history[-1].to_state.value} but state is {record.state.value}",
            )
        )
    return violations


def transition(
    record: SessionRecord,
    event: SessionEvent,
    *,
    actor: str = "user",
    now: datetime | None = None,
) -> SessionRecord:
    """Apply one event to the session state machine.

    Returns a new record with updated state, ``updated_at``, and an appended
    history entry; the input record is never mutated. Raises IllegalTransition
    for any (state, event) pair outside the legal relation, and also when the
    resulting record would fail validate_session (e.g. transitioning to
    Generated without an initial image attached) so an invalid record is never
    returned silently.
    """
    key = (record.state, event)
    target = TRANSITIONS.get(key)
    if target is None:
        raise IllegalTransition(record.state.value, event.value)

    ts = now if now is not None else utc_now()
    entry = HistoryEntry(
        timestamp=ts, from_state=record.state, to_state=target, actor=actor
    )
    result = replace(
        record,
        state=target,
        updated_at=ts,
        history=record.history + (entry,),
    )
    violations = validate_session(result)
    if violations:
        raise IllegalTransition(
            record.state.value,
            event.value,
            reason="; ".join(v.message for v in violations),
        )
    return result
