"""Filesystem session store: one directory per session, artifacts named by
content hash, the record as a JSON document.

Persistence order is the crash-safety contract: artifact blobs are written
(atomically, temp + rename) before the record that references them, so a crash
between the two leaves a recoverable orphan blob, never a dangling reference.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime
from pathlib import Path

from .errors import SessionNotFound, StorageFailure, ValidationFailure
from .model import (
    BinaryMask,
    HistoryEntry,
    MaskSeed,
    PromptRecord,
    RasterImage,
    ScoreReport,
    SessionRecord,
    SessionState,
)
from . import pngio

RECORD_FILE = "record.json"

_REF_HASH_CHARS = 16


def image_ref(image: RasterImage) -> str:
    return image.content_hash()[:_REF_HASH_CHARS] + ".png"


def mask_ref(mask: BinaryMask) -> str:
    return mask.content_hash()[:_REF_HASH_CHARS] + ".png"


def text_ref(text: str) -> str:
    return hashlib.sha256(b"text" + text.encode("utf-8")).hexdigest()[:_REF_HASH_CHARS] + ".txt"


def json_ref(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(b"json" + canonical).hexdigest()[:_REF_HASH_CHARS] + ".json"


def _score_report_payload(report: ScoreReport) -> dict:
    return {
        "prompt_used": report.prompt_used,
        "initial_score": report.initial_score,
        "inpainted_score": report.inpainted_score,
        "delta": report.delta,
        "embedder_id": report.embedder_id,
    }


def _score_report_from_payload(payload: dict) -> ScoreReport:
    return ScoreReport(
        prompt_used=payload["prompt_used"],
        initial_score=float(payload["initial_score"]),
        inpainted_score=float(payload["inpainted_score"]),
        delta=float(payload["delta"]),
        embedder_id=payload["embedder_id"],
    )


def record_to_payload(record: SessionRecord) -> dict:
    """Serializable view of a record; raster artifacts appear as content refs."""
    return {
        "session_id": record.session_id,
        "state": record.state.value,
        "seed": record.seed,
        "prompts": {
            "initial_prompt": record.prompts.initial_prompt,
            "target_description": record.prompts.target_description,
            "refined_prompt": record.prompts.refined_prompt,
            "suggested_prompt": record.prompts.suggested_prompt,
        },
        "mask_seed": record.mask_seed.to_dict() if record.mask_seed else None,
        "score_report": (
            _score_report_payload(record.score_report) if record.score_report else None
        ),
        "created_at": record.created_at.isoformat(),
        "updated_at": record.updated_at.isoformat(),
        "history": [
            {
                "timestamp": entry.timestamp.isoformat(),
                "from_state": entry.from_state.value,
                "to_state": entry.to_state.value,
                "actor": entry.actor,
            }
            for entry in record.history
        ],
        "artifacts": {
            "initial_image": image_ref(record.initial_image) if record.initial_image else None,
            "mask": mask_ref(record.mask) if record.mask else None,
            "inpainted_image": (
                image_ref(record.inpainted_image) if record.inpainted_image else None
            ),
        },
    }


class SessionStore:
    """Stores sessions under ``root/<session_id>/``; values are immutable once
    written, so concurrent readers need no locking."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(f"cannot create artifact root {self.root}: {exc}") from exc

    # -- low-level ----------------------------------------------------------

    def session_dir(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise ValidationFailure(f"bad session id {session_id!r}")
        return self.root / session_id

    def exists(self, session_id: str) -> bool:
        return (self.session_dir(session_id) / RECORD_FILE).is_file()

    def _write_atomic(self, path: Path, data: bytes) -> None:
        """Single choke point for all persistence; temp file + rename in the
        destination directory so readers never observe partial writes."""
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, path)
        except OSError as exc:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise StorageFailure(f"cannot write {path}: {exc}") from exc

    # -- records ------------------------------------------------------------

    def save_record(self, record: SessionRecord) -> dict[str, str]:
        """Persist blobs first, then the record document. Returns the refs of
        the artifacts currently attached to the record."""
        directory = self.session_dir(record.session_id)
        refs: dict[str, str] = {}
        if record.initial_image is not None:
            refs["initial_image"] = self._put_blob(
                directory, image_ref(record.initial_image), pngio.image_to_png_bytes(record.initial_image)
            )
        if record.mask is not None:
            refs["mask"] = self._put_blob(
                directory, mask_ref(record.mask), pngio.mask_to_png_bytes(record.mask)
            )
        if record.inpainted_image is not None:
            refs["inpainted_image"] = self._put_blob(
                directory,
                image_ref(record.inpainted_image),
                pngio.image_to_png_bytes(record.inpainted_image),
            )
        if record.prompts.refined_prompt:
            refs["refined_prompt"] = self._put_blob(
                directory,
                text_ref(record.prompts.refined_prompt),
                record.prompts.refined_prompt.encode("utf-8"),
            )
        if record.score_report is not None:
            payload = _score_report_payload(record.score_report)
            refs["score_report"] = self._put_blob(
                directory,
                json_ref(payload),
                json.dumps(payload, sort_keys=True, indent=2).encode("utf-8"),
            )
        document = json.dumps(record_to_payload(record), sort_keys=True, indent=2)
        self._write_atomic(directory / RECORD_FILE, document.encode("utf-8"))
        return refs

    def _put_blob(self, directory: Path, ref: str, data: bytes) -> str:
        path = directory / ref
        if not path.exists():
            self._write_atomic(path, data)
        return ref

    def load_payload(self, session_id: str) -> dict:
        """The stored record document (artifact refs, no pixel data)."""
        record_path = self.session_dir(session_id) / RECORD_FILE
        if not record_path.is_file():
            raise SessionNotFound(f"session {session_id} not found")
        try:
            return json.loads(record_path.read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"cannot read record for {session_id}: {exc}") from exc

    def load(self, session_id: str) -> SessionRecord:
        directory = self.session_dir(session_id)
        payload = self.load_payload(session_id)

        artifacts = payload.get("artifacts", {})
        initial_image = self._load_image(directory, artifacts.get("initial_image"))
        inpainted_image = self._load_image(directory, artifacts.get("inpainted_image"))
        mask = self._load_mask(directory, artifacts.get("mask"))
        prompts_payload = payload["prompts"]
        mask_seed_payload = payload.get("mask_seed")
        score_payload = payload.get("score_report")
        return SessionRecord(
            session_id=payload["session_id"],
            state=SessionState(payload["state"]),
            prompts=PromptRecord(
                initial_prompt=prompts_payload["initial_prompt"],
                target_description=prompts_payload["target_description"],
                refined_prompt=prompts_payload.get("refined_prompt"),
                suggested_prompt=prompts_payload.get("suggested_prompt"),
            ),
            seed=int(payload["seed"]),
            created_at=datetime.fromisoformat(payload["created_at"]),
            updated_at=datetime.fromisoformat(payload["updated_at"]),
            initial_image=initial_image,
            mask=mask,
            mask_seed=MaskSeed.from_dict(mask_seed_payload) if mask_seed_payload else None,
            inpainted_image=inpainted_image,
            score_report=_score_report_from_payload(score_payload) if score_payload else None,
            history=tuple(
                HistoryEntry(
                    timestamp=datetime.fromisoformat(entry["timestamp"]),
                    from_state=SessionState(entry["from_state"]),
                    to_state=SessionState(entry["to_state"]),
                    actor=entry["actor"],
                )
                for entry in payload.get("history", [])
            ),
        )

    def _load_image(self, directory: Path, ref: str | None) -> RasterImage | None:
        if ref is None:
            return None
        path = directory / ref
        if not path.is_file():
            raise StorageFailure(f"record references missing artifact {ref}")
        return pngio.image_from_png_bytes(path.read_bytes())

    def _load_mask(self, directory: Path, ref: str | None) -> BinaryMask | None:
        if ref is None:
            return None
        path = directory / ref
        if not path.is_file():
            raise StorageFailure(f"record references missing artifact {ref}")
        return pngio.mask_from_png_bytes(path.read_bytes())

    # -- listing ------------------------------------------------------------

    def list_ids(self) -> list[str]:
        """Session ids ordered by creation time, then id, for stable paging."""
        entries: list[tuple[str, str]] = []
        if not self.root.is_dir():
            return []
        for child in self.root.iterdir():
            record_path = child / RECORD_FILE
            if not record_path.is_file():
                continue
            try:
                payload = json.loads(record_path.read_text("utf-8"))
                entries.append((payload.get("created_at", ""), child.name))
            except (OSError, ValueError):
                continue
        entries.sort()
        return [session_id for _, session_id in entries]

    def read_artifact(self, session_id: str, ref: str) -> bytes:
        if "/" in ref or ref.startswith("."):
            raise ValidationFailure(f"bad artifact ref {ref!r}")
        path = self.session_dir(session_id) / ref
        if not path.is_file():
            raise StorageFailure(f"artifact {ref} not found for session {session_id}")
        return path.read_bytes()
