from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from inpaint_studio.errors import SessionNotFound, StorageFailure
from inpaint_studio.model import (
    BinaryMask,
    MaskSeed,
    ScoreReport,
    SessionEvent,
    SessionRecord,
    transition,
    validate_session,
)
from inpaint_studio.store import SessionStore, image_ref, mask_ref

from conftest import two_color_image


def sample_record(clock) -> SessionRecord:
    image = two_color_image(16, 16)
    mask = BinaryMask(np.pad(np.ones((5, 5), np.uint8), ((0, 11), (0, 11))))
    record = SessionRecord.create(
        "abc123", "blue bananas and red apples", "blue bananas", seed=9, now=clock()
    )
    record = replace(record, initial_image=image)
    record = transition(record, SessionEvent.IMAGE_GENERATED, now=clock())
    record = replace(record, mask=mask, mask_seed=MaskSeed.from_box(0, 0, 4, 4))
    record = transition(record, SessionEvent.MASK_SET, now=clock())
    record = replace(record, prompts=replace(record.prompts, refined_prompt="refined", suggested_prompt="refined"))
    record = transition(record, SessionEvent.PROMPT_REFINED, now=clock())
    record = replace(record, inpainted_image=two_color_image(16, 16))
    record = transition(record, SessionEvent.INPAINTED, now=clock())
    record = replace(record, score_report=ScoreReport.build("p", 10.0, 11.5, "stub"))
    return transition(record, SessionEvent.SCORED, now=clock())


def test_round_trip_reproduces_record_exactly(tmp_path, fixed_clock):
    store = SessionStore(tmp_path)
    record = sample_record(fixed_clock)
    store.save_record(record)
    loaded = store.load("abc123")
    assert loaded == record
    assert validate_session(loaded) == []


def test_artifacts_named_by_content_hash(tmp_path, fixed_clock):
    store = SessionStore(tmp_path)
    record = sample_record(fixed_clock)
    refs = store.save_record(record)
    assert refs["initial_image"] == image_ref(record.initial_image)
    assert refs["mask"] == mask_ref(record.mask)
    session_dir = tmp_path / "abc123"
    for ref in refs.values():
        assert (session_dir / ref).is_file()
    payload = json.loads((session_dir / "record.json").read_text())
    assert payload["artifacts"]["initial_image"] == refs["initial_image"]


def test_identical_content_is_stored_once(tmp_path, fixed_clock):
    store = SessionStore(tmp_path)
    record = sample_record(fixed_clock)
    # initial and inpainted are the same pixels here, so one blob serves both
    refs = store.save_record(record)
    assert refs["initial_image"] == refs["inpainted_image"]
    pngs = list((tmp_path / "abc123").glob("*.png"))
    assert len(pngs) == 2  # one image blob + one mask blob


def test_missing_session_raises(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(SessionNotFound):
        store.load("nope")


def test_dangling_reference_fails_loudly(tmp_path, fixed_clock):
    store = SessionStore(tmp_path)
    record = sample_record(fixed_clock)
    refs = store.save_record(record)
    (tmp_path / "abc123" / refs["initial_image"]).unlink()
    with pytest.raises(StorageFailure):
        store.load("abc123")


def test_list_ids_ordered_by_creation(tmp_path, fixed_clock):
    store = SessionStore(tmp_path)
    for name in ("s1", "s2", "s3"):
        record = SessionRecord.create(name, "prompt", "target", seed=0, now=fixed_clock())
        store.save_record(record)
    assert store.list_ids() == ["s1", "s2", "s3"]


class FaultInjectingStore(SessionStore):
    """Raises StorageFailure on the Nth atomic write, then recovers."""

    def __init__(self, root, fail_at: int):
        super().__init__(root)
        self.write_count = 0
        self.fail_at = fail_at

    def _write_atomic(self, path, data):
        self.write_count += 1
        if self.write_count == self.fail_at:
            raise StorageFailure(f"injected fault at write #{self.write_count}")
        super()._write_atomic(path, data)


def test_crash_between_artifact_and_record_leaves_loadable_state(tmp_path, fixed_clock):
    """Whatever write the crash lands on, the stored record never references a
    missing artifact: blobs are written before the record that names them."""
    record = sample_record(fixed_clock)
    for fail_at in range(1, 8):
        root = tmp_path / f"run{fail_at}"
        store = FaultInjectingStore(root, fail_at)
        baseline = SessionStore(root)
        try:
            store.save_record(record)
        except StorageFailure:
            pass
        # the record either never appeared, or is fully consistent
        try:
            loaded = baseline.load("abc123")
        except SessionNotFound:
            continue
        assert validate_session(loaded) == []
