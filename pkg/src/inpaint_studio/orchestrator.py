"""Drive the correction pipeline over sessions: execute each stage with the
configured backends, enforce the state machine, persist every artifact.

Stages run synchronously under a per-session lease (one in-flight stage per
session); the service layer adds asynchrony via job polling. Artifacts are
persisted before the record that references them, and a failed stage leaves
state, artifacts, and history exactly as before the call.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable

from .config import (
    PipelineConfig,
    apply_backend_overrides,
    resolve_embedder,
    resolve_generation_backend,
    resolve_inpaint_backend,
    resolve_segmenter,
    validate_refiner,
)
from .errors import (
    BackendUnavailable,
    DimensionMismatch,
    EmptyRefinement,
    IllegalTransition,
    ParseFailure,
    SessionBusy,
    StageError,
    StudioError,
    ValidationFailure,
)
from .generation import GenerationRequest, InpaintRequest
from .model import (
    BinaryMask,
    MaskSeed,
    ScoreReport,
    SessionEvent,
    SessionRecord,
    SessionState,
    transition,
    utc_now,
)
from .refinement import INSTRUCTION_VERSION, RefinementRequest, refine_llm, refine_template
from .scoring import compare
from .segmentation import HttpEndpoint
from .store import SessionStore
from . import pngio

#: Pipeline stage name -> the event it applies.
STAGE_EVENTS: dict[str, SessionEvent] = {
    "generate": SessionEvent.IMAGE_GENERATED,
    "mask": SessionEvent.MASK_SET,
    "refine": SessionEvent.PROMPT_REFINED,
    "inpaint": SessionEvent.INPAINTED,
    "score": SessionEvent.SCORED,
}

STAGE_ORDER = ("generate", "mask", "refine", "inpaint", "score")


@dataclass(frozen=True)
class StageResult:
    """Outcome of one executed stage."""

    session_id: str
    stage: str
    state: SessionState
    artifact_refs: dict[str, str]
    duration_ms: float
    backend_id: str


@dataclass(frozen=True)
class Scenario:
    """Non-interactive description of a full correction session."""

    name: str
    initial_prompt: str
    target_description: str
    seed: int
    mask_seed: MaskSeed | None = None
    mask_file: str | None = None
    backends: dict = field(default_factory=dict)
    style_hint: str | None = None


def parse_scenario(payload: dict, *, name: str = "scenario", base_dir: Path | None = None) -> Scenario:
    """Parse a scenario document, raising ParseFailure naming the bad field."""
    if not isinstance(payload, dict):
        raise ParseFailure("scenario", "scenario must be a JSON object")

    def require_str(fieldname: str) -> str:
        value = payload.get(fieldname)
        if not isinstance(value, str) or not value.strip():
            raise ParseFailure(fieldname, "required non-empty string")
        return value

    initial_prompt = require_str("initial_prompt")
    target_description = require_str("target_description")
    seed = payload.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ParseFailure("seed", "required integer")

    mask_seed_payload = payload.get("mask_seed")
    mask_file = payload.get("mask_file")
    if (mask_seed_payload is None) == (mask_file is None):
        raise ParseFailure("mask_seed", "exactly one of mask_seed or mask_file is required")
    mask_seed = None
    if mask_seed_payload is not None:
        try:
            mask_seed = MaskSeed.from_dict(mask_seed_payload)
        except (ValidationFailure, KeyError, TypeError, ValueError) as exc:
            raise ParseFailure("mask_seed", str(exc)) from exc
    if mask_file is not None:
        if not isinstance(mask_file, str):
            raise ParseFailure("mask_file", "must be a path string")
        if base_dir is not None and not Path(mask_file).is_absolute():
            mask_file = str(base_dir / mask_file)

    backends = payload.get("backends", {})
    if not isinstance(backends, dict):
        raise ParseFailure("backends", "must be an object of backend keys")
    style_hint = payload.get("style_hint")
    if style_hint is not None and not isinstance(style_hint, str):
        raise ParseFailure("style_hint", "must be a string")

    known = {
        "initial_prompt",
        "target_description",
        "seed",
        "mask_seed",
        "mask_file",
        "backends",
        "style_hint",
        "name",
    }
    for key in payload:
        if key not in known:
            raise ParseFailure(key, "unknown scenario field")

    return Scenario(
        name=payload.get("name", name),
        initial_prompt=initial_prompt,
        target_description=target_description,
        seed=seed,
        mask_seed=mask_seed,
        mask_file=mask_file,
        backends=dict(backends),
        style_hint=style_hint,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        payload = json.loads(path.read_text("utf-8"))
    except (OSError, ValueError) as exc:
        raise ParseFailure("scenario", f"{path}: {exc}") from exc
    return parse_scenario(payload, name=path.stem, base_dir=path.parent)


def legal_event_for_stage(state: SessionState, stage: str) -> SessionEvent:
    """The event a stage call would apply from the given state.

    For the mask stage on a Scored session this is RestartMask (the iteration
    loop); the MaskSet re-mask follows inside the same stage call.
    """
    from .model import TRANSITIONS

    event = STAGE_EVENTS[stage]
    if (state, event) in TRANSITIONS:
        return event
    if stage == "mask" and (state, SessionEvent.RESTART_MASK) in TRANSITIONS:
        return SessionEvent.RESTART_MASK
    raise IllegalTransition(state.value, event.value)


class Orchestrator:
    """Thread-safe across sessions; per-session single writer via a lease."""

    def __init__(
        self,
        config: PipelineConfig,
        store: SessionStore | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.config = config
        self.store = store if store is not None else SessionStore(config.artifact_root)
        self._clock = clock if clock is not None else utc_now
        self._leases: dict[str, threading.Lock] = {}
        self._leases_guard = threading.Lock()
        # Resolve every backend now so a bad key fails at startup, not mid-run.
        self.generation_backend = resolve_generation_backend(config)
        self.inpaint_backend = resolve_inpaint_backend(config)
        self.segmenter = resolve_segmenter(config)
        self.embedder = resolve_embedder(config)
        validate_refiner(config)

    # -- leases --------------------------------------------------------------

    @contextmanager
    def _lease(self, session_id: str):
        with self._leases_guard:
            lock = self._leases.setdefault(session_id, threading.Lock())
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"a stage is already running for session {session_id}")
        try:
            yield
        finally:
            lock.release()

    # -- session lifecycle ----------------------------------------------------

    def create_session(
        self, initial_prompt: str, target_description: str, seed: int
    ) -> SessionRecord:
        record = SessionRecord.create(
            session_id=uuid.uuid4().hex,
            initial_prompt=initial_prompt,
            target_description=target_description,
            seed=seed,
            now=self._clock(),
        )
        self.store.save_record(record)
        return record

    def get_session(self, session_id: str) -> SessionRecord:
        return self.store.load(session_id)

    def check_stage_legal(self, session_id: str, stage: str) -> SessionState:
        """Raise IllegalTransition unless the stage is legal right now."""
        record = self.store.load(session_id)
        legal_event_for_stage(record.state, stage)
        return record.state

    # -- stages ----------------------------------------------------------------

    def run_generate(self, session_id: str) -> StageResult:
        with self._lease(session_id):
            record = self.store.load(session_id)
            legal_event_for_stage(record.state, "generate")
            started = time.perf_counter()
            image = self.generation_backend.generate(
                GenerationRequest(
                    prompt=record.prompts.initial_prompt,
                    seed=record.seed,
                    width=self.config.image_width,
                    height=self.config.image_height,
                )
            )
            new_record = transition(
                _with(record, initial_image=image),
                SessionEvent.IMAGE_GENERATED,
                actor="orchestrator",
                now=self._clock(),
            )
            refs = self.store.save_record(new_record)
            return StageResult(
                session_id=session_id,
                stage="generate",
                state=new_record.state,
                artifact_refs={"image": refs["initial_image"]},
                duration_ms=_ms_since(started),
                backend_id=self.generation_backend.id,
            )

    def run_mask(self, session_id: str, seed_or_mask: MaskSeed | BinaryMask) -> StageResult:
        """Apply a gesture (routed to the segmenter) or a directly painted mask."""
        with self._lease(session_id):
            record = self.store.load(session_id)
            first_event = legal_event_for_stage(record.state, "mask")
            if record.initial_image is None:
                raise ValidationFailure("session has no initial image to mask")
            started = time.perf_counter()

            if isinstance(seed_or_mask, BinaryMask):
                mask = seed_or_mask
                if mask.size != record.initial_image.size:
                    raise DimensionMismatch(
                        f"uploaded mask {mask.width}x{mask.height} does not match "
                        f"image {record.initial_image.width}x{record.initial_image.height}"
                    )
                mask_seed = None
                backend_id = "upload"
            else:
                mask = self.segmenter.segment(record.initial_image, seed_or_mask)
                mask_seed = seed_or_mask
                backend_id = self.segmenter.id

            working = record
            if first_event == SessionEvent.RESTART_MASK:
                working = transition(
                    working, SessionEvent.RESTART_MASK, actor="orchestrator", now=self._clock()
                )
            new_record = transition(
                _with(working, mask=mask, mask_seed=mask_seed),
                SessionEvent.MASK_SET,
                actor="orchestrator",
                now=self._clock(),
            )
            refs = self.store.save_record(new_record)
            return StageResult(
                session_id=session_id,
                stage="mask",
                state=new_record.state,
                artifact_refs={"mask": refs["mask"]},
                duration_ms=_ms_since(started),
                backend_id=backend_id,
            )

    def run_refine(
        self,
        session_id: str,
        user_edit: str | None = None,
        style_hint: str | None = None,
    ) -> StageResult:
        """Refine the target description; any LLM failure degrades to the template."""
        with self._lease(session_id):
            record = self.store.load(session_id)
            legal_event_for_stage(record.state, "refine")
            started = time.perf_counter()
            request = RefinementRequest(
                initial_prompt=record.prompts.initial_prompt,
                target_description=record.prompts.target_description,
                style_hint=style_hint,
            )
            suggestion, backend_id = self._refine(request)
            final = user_edit.strip() if user_edit and user_edit.strip() else suggestion
            prompts = _with(
                record.prompts, refined_prompt=final, suggested_prompt=suggestion
            )
            new_record = transition(
                _with(record, prompts=prompts),
                SessionEvent.PROMPT_REFINED,
                actor="orchestrator",
                now=self._clock(),
            )
            refs = self.store.save_record(new_record)
            return StageResult(
                session_id=session_id,
                stage="refine",
                state=new_record.state,
                artifact_refs={"prompt": refs["refined_prompt"]},
                duration_ms=_ms_since(started),
                backend_id=backend_id,
            )

    def _refine(self, request: RefinementRequest) -> tuple[str, str]:
        if self.config.refiner == "llm":
            endpoint = HttpEndpoint(
                url=self.config.refiner_url,
                timeout_s=self.config.backend_timeout_s,
                headers={"x-api-key-env": self.config.refiner_api_key_env},
            )
            try:
                return refine_llm(request, endpoint), f"llm:{INSTRUCTION_VERSION}"
            except (BackendUnavailable, EmptyRefinement):
                return refine_template(request), "template"
        return refine_template(request), "template"

    def run_inpaint(self, session_id: str) -> StageResult:
        with self._lease(session_id):
            record = self.store.load(session_id)
            legal_event_for_stage(record.state, "inpaint")
            if record.initial_image is None or record.mask is None:
                raise ValidationFailure("session is missing the image or mask to inpaint")
            started = time.perf_counter()
            result = self.inpaint_backend.inpaint(
                InpaintRequest(
                    image=record.initial_image,
                    mask=record.mask,
                    refined_prompt=record.prompts.refined_prompt,
                    seed=record.seed,
                    feather_radius=self.config.feather_radius,
                )
            )
            new_record = transition(
                _with(record, inpainted_image=result),
                SessionEvent.INPAINTED,
                actor="orchestrator",
                now=self._clock(),
            )
            refs = self.store.save_record(new_record)
            return StageResult(
                session_id=session_id,
                stage="inpaint",
                state=new_record.state,
                artifact_refs={"image": refs["inpainted_image"]},
                duration_ms=_ms_since(started),
                backend_id=self.inpaint_backend.id,
            )

    def run_score(self, session_id: str) -> StageResult:
        with self._lease(session_id):
            record = self.store.load(session_id)
            legal_event_for_stage(record.state, "score")
            if record.initial_image is None or record.inpainted_image is None:
                raise ValidationFailure("session is missing images to score")
            started = time.perf_counter()
            report = compare(
                record.initial_image,
                record.inpainted_image,
                record.prompts.initial_prompt,
                self.embedder,
            )
            new_record = transition(
                _with(record, score_report=report),
                SessionEvent.SCORED,
                actor="orchestrator",
                now=self._clock(),
            )
            refs = self.store.save_record(new_record)
            return StageResult(
                session_id=session_id,
                stage="score",
                state=new_record.state,
                artifact_refs={"score": refs["score_report"]},
                duration_ms=_ms_since(started),
                backend_id=self.embedder.id,
            )

    # -- batch ------------------------------------------------------------------

    def run_scenario(self, scenario: Scenario) -> ScoreReport:
        """Execute all five stages end to end, non-interactively.

        Any stage failure is re-raised as StageError annotated with the stage
        name. Scenario backend overrides run in a derived orchestrator sharing
        this one's store.
        """
        runner = self
        if scenario.backends:
            runner = Orchestrator(
                apply_backend_overrides(self.config, scenario.backends),
                store=self.store,
                clock=self._clock,
            )

        def step(stage: str, fn: Callable[[], StageResult]) -> StageResult:
            try:
                return fn()
            except StudioError as exc:
                raise StageError(stage, exc) from exc

        try:
            record = runner.create_session(
                scenario.initial_prompt, scenario.target_description, scenario.seed
            )
        except StudioError as exc:
            raise StageError("create", exc) from exc
        sid = record.session_id

        step("generate", lambda: runner.run_generate(sid))
        if scenario.mask_file is not None:
            try:
                mask = pngio.mask_from_png_bytes(Path(scenario.mask_file).read_bytes())
            except OSError as exc:
                raise StageError("mask", ValidationFailure(str(exc))) from exc
            step("mask", lambda: runner.run_mask(sid, mask))
        else:
            step("mask", lambda: runner.run_mask(sid, scenario.mask_seed))
        step("refine", lambda: runner.run_refine(sid, style_hint=scenario.style_hint))
        step("inpaint", lambda: runner.run_inpaint(sid))
        step("score", lambda: runner.run_score(sid))

        final = runner.store.load(sid)
        return final.score_report


def _ms_since(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def _with(value, **changes):
    from dataclasses import replace as _replace

    return _replace(value, **changes)
