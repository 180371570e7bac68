"""HTTP surface for the pipeline: session CRUD, stage jobs, artifacts, health.

Stages return 202 + a job handle and run on a worker pool; clients poll
GET /jobs/{id}. Responses carry content ids only, never filesystem paths.
"""

from __future__ import annotations

import random
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Callable

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import PipelineConfig, load_config
from .errors import (
    IllegalTransition,
    SessionBusy,
    SessionNotFound,
    StudioError,
    ValidationFailure,
)
from .model import MaskSeed, SessionState, TRANSITIONS
from .orchestrator import STAGE_EVENTS, Orchestrator, StageResult, legal_event_for_stage
from . import pngio

_STATUS_BY_CODE = {
    "SessionNotFound": 404,
    "IllegalTransition": 409,
    "SessionBusy": 409,
    "ValidationFailure": 422,
    "ParseFailure": 422,
    "SeedOutOfBounds": 422,
    "EmptyStrokes": 422,
    "RegionTooLarge": 422,
    "DimensionMismatch": 422,
    "BackendUnavailable": 502,
    "MalformedBackendResponse": 502,
    "StorageFailure": 500,
}

_IMAGE_STAGES = {"initial": "initial_image", "mask": "mask", "inpainted": "inpainted_image"}


@dataclass
class Job:
    job_id: str
    session_id: str
    stage: str
    status: str = "pending"  # pending | running | done | failed
    error: dict | None = None
    result: StageResult | None = None

    def payload(self) -> dict:
        body = {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "stage": self.stage,
            "status": self.status,
            "error": self.error,
            "result": None,
        }
        if self.result is not None:
            body["result"] = {
                "session_id": self.result.session_id,
                "stage": self.result.stage,
                "state": self.result.state.value,
                "artifact_refs": dict(self.result.artifact_refs),
                "duration_ms": self.result.duration_ms,
                "backend_id": self.result.backend_id,
            }
        return body


class JobRegistry:
    """In-memory job table; guards one in-flight stage per session."""

    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._active_by_session: dict[str, str] = {}
        self._lock = threading.Lock()

    def submit(self, session_id: str, stage: str) -> Job:
        with self._lock:
            active = self._active_by_session.get(session_id)
            if active is not None and self._jobs[active].status in ("pending", "running"):
                raise SessionBusy(f"job {active} is already in flight for session {session_id}")
            job = Job(job_id=uuid.uuid4().hex, session_id=session_id, stage=stage)
            self._jobs[job.job_id] = job
            self._active_by_session[session_id] = job.job_id
            return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def mark_running(self, job_id: str) -> None:
        with self._lock:
            self._jobs[job_id].status = "running"

    def mark_done(self, job_id: str, result: StageResult) -> None:
        with self._lock:
            job = self._jobs[job_id]
            job.status = "done"
            job.result = result

    def mark_failed(self, job_id: str, error: dict) -> None:
        with self._lock:
            job = self._jobs[job_id]
            job.status = "failed"
            job.error = error


class SessionCreate(BaseModel):
    initial_prompt: str
    target_description: str
    seed: int | None = None


class RefineBody(BaseModel):
    user_edit: str | None = None


def _error_payload(exc: StudioError) -> dict:
    return {
        "code": exc.code,
        "message": str(exc),
        "http_status": _STATUS_BY_CODE.get(exc.code, 500),
    }


def create_app(
    config: PipelineConfig | None = None, orchestrator: Orchestrator | None = None
) -> FastAPI:
    cfg = config if config is not None else load_config()
    orch = orchestrator if orchestrator is not None else Orchestrator(cfg)
    jobs = JobRegistry()
    executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="stage")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        executor.shutdown(wait=False)

    app = FastAPI(title="inpaint-studio", version="0.1.0", lifespan=lifespan)
    app.state.orchestrator = orch
    app.state.jobs = jobs

    @app.exception_handler(StudioError)
    async def handle_studio_error(request: Request, exc: StudioError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"error": {"code": exc.code, "message": str(exc)}}
        )

    def submit_stage(session_id: str, stage: str, runner: Callable[[], StageResult]) -> dict:
        orch.check_stage_legal(session_id, stage)  # 404 / 409 before enqueueing
        job = jobs.submit(session_id, stage)

        def work():
            jobs.mark_running(job.job_id)
            try:
                result = runner()
            except StudioError as exc:
                jobs.mark_failed(job.job_id, _error_payload(exc))
            except Exception as exc:  # defensive: never lose a job
                jobs.mark_failed(
                    job.job_id,
                    {"code": "InternalError", "message": str(exc), "http_status": 500},
                )
            else:
                jobs.mark_done(job.job_id, result)

        executor.submit(work)
        return job.payload()

    # -- sessions -------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreate):
        seed = body.seed if body.seed is not None else random.randint(0, 2**31 - 1)
        record = orch.create_session(body.initial_prompt, body.target_description, seed)
        return orch.store.load_payload(record.session_id)

    @app.get("/sessions")
    def list_sessions(offset: int = 0, limit: int = 50):
        ids = orch.store.list_ids()
        page = ids[offset : offset + limit]
        return {
            "sessions": [orch.store.load_payload(sid) for sid in page],
            "total": len(ids),
            "offset": offset,
            "limit": limit,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return orch.store.load_payload(session_id)

    @app.get("/sessions/{session_id}/images/{stage}")
    def get_stage_image(session_id: str, stage: str):
        if stage not in _IMAGE_STAGES:
            raise ValidationFailure(
                f"stage must be one of {sorted(_IMAGE_STAGES)}, got {stage!r}"
            )
        payload = orch.store.load_payload(session_id)
        ref = payload["artifacts"].get(_IMAGE_STAGES[stage])
        if ref is None:
            raise SessionNotFound(f"session {session_id} has no {stage} image yet")
        data = orch.store.read_artifact(session_id, ref)
        return Response(content=data, media_type="image/png")

    # -- stage jobs -------------------------------------------------------------

    @app.post("/sessions/{session_id}/generate", status_code=202)
    def stage_generate(session_id: str):
        return submit_stage(session_id, "generate", lambda: orch.run_generate(session_id))

    @app.post("/sessions/{session_id}/mask", status_code=202)
    async def stage_mask(session_id: str, request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("mask")
            if upload is None:
                raise ValidationFailure("multipart body must include a 'mask' file part")
            data = await upload.read()
            seed_or_mask = pngio.mask_from_png_bytes(data)
        else:
            try:
                body = await request.json()
            except Exception as exc:
                raise ValidationFailure(f"body must be JSON or multipart: {exc}") from exc
            seed_payload = (body or {}).get("seed")
            if seed_payload is None:
                raise ValidationFailure("JSON body must include a 'seed' gesture")
            seed_or_mask = MaskSeed.from_dict(seed_payload)
        return submit_stage(session_id, "mask", lambda: orch.run_mask(session_id, seed_or_mask))

    @app.post("/sessions/{session_id}/refine", status_code=202)
    def stage_refine(session_id: str, body: RefineBody | None = None):
        user_edit = body.user_edit if body else None
        return submit_stage(session_id, "refine", lambda: orch.run_refine(session_id, user_edit))

    @app.post("/sessions/{session_id}/inpaint", status_code=202)
    def stage_inpaint(session_id: str):
        return submit_stage(session_id, "inpaint", lambda: orch.run_inpaint(session_id))

    @app.post("/sessions/{session_id}/score", status_code=202)
    def stage_score(session_id: str):
        return submit_stage(session_id, "score", lambda: orch.run_score(session_id))

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise SessionNotFound(f"job {job_id} not found")
        return job.payload()

    # -- meta --------------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "backends": _backend_health(orch)}

    @app.get("/spec")
    def spec():
        """Machine-readable surface: routes plus the transition relation the UI
        derives its action enablement from."""
        skip = {"/openapi.json", "/docs", "/docs/oauth2-redirect", "/redoc"}
        routes = sorted(
            {
                (method, route.path)
                for route in app.routes
                if getattr(route, "methods", None) and route.path not in skip
                for method in route.methods
                if method != "HEAD"
            }
        )
        transitions: dict[str, dict[str, str]] = {state.value: {} for state in SessionState}
        for (state, event), target in TRANSITIONS.items():
            transitions[state.value][event.value] = target.value
        enabled_stages = {
            state.value: sorted(
                stage for stage in STAGE_EVENTS if _stage_legal(state, stage)
            )
            for state in SessionState
        }
        return {
            "routes": [{"method": method, "path": path} for method, path in routes],
            "states": [state.value for state in SessionState],
            "events": [event.value for event in STAGE_EVENTS.values()],
            "transitions": transitions,
            "enabled_stages": enabled_stages,
            "image_stages": sorted(_IMAGE_STAGES),
        }

    return app


def _stage_legal(state: SessionState, stage: str) -> bool:
    try:
        legal_event_for_stage(state, stage)
        return True
    except IllegalTransition:
        return False


def _backend_health(orch: Orchestrator) -> dict:
    summary = {}
    for slot, backend in (
        ("generation", orch.generation_backend),
        ("inpaint", orch.inpaint_backend),
        ("segmenter", orch.segmenter),
        ("embedder", orch.embedder),
    ):
        endpoint = getattr(backend, "endpoint", None)
        if endpoint is None:
            summary[slot] = {"id": backend.id, "kind": "local", "reachable": True}
        else:
            summary[slot] = {
                "id": backend.id,
                "kind": "http",
                "reachable": _ping(endpoint.url),
            }
    refiner = orch.config.refiner
    if refiner == "template":
        summary["refiner"] = {"id": "template", "kind": "local", "reachable": True}
    else:
        summary["refiner"] = {
            "id": f"llm:{orch.config.refiner_url}",
            "kind": "http",
            "reachable": _ping(orch.config.refiner_url),
        }
    return summary


def _ping(url: str | None) -> bool:
    if not url:
        return False
    import requests

    try:
        requests.get(url, timeout=2)
        return True
    except requests.RequestException:
        return False
