from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inpaint_studio.errors import IllegalTransition, ValidationFailure
from inpaint_studio.model import (
    BinaryMask,
    MaskSeed,
    RasterImage,
    ScoreReport,
    SessionEvent,
    SessionRecord,
    SessionState,
    Stroke,
    TRANSITIONS,
    transition,
    validate_session,
)

from conftest import two_color_image


def fresh_record(**overrides) -> SessionRecord:
    record = SessionRecord.create(
        session_id="s1",
        initial_prompt="blue bananas and red apples on the table",
        target_description="blue bananas",
        seed=7,
    )
    return replace(record, **overrides) if overrides else record


def populated_record(state: SessionState, clock) -> SessionRecord:
    """Drive a fully-artifacted record to ``state`` through legal transitions."""
    image = two_color_image(16, 16)
    mask = BinaryMask(np.pad(np.ones((4, 4), np.uint8), ((0, 12), (0, 12))))
    record = fresh_record(
        initial_image=image,
        mask=mask,
        inpainted_image=image,
        score_report=ScoreReport.build("p", 10.0, 12.0, "stub"),
        prompts=replace(fresh_record().prompts, refined_prompt="a refined prompt"),
    )
    path = {
        SessionState.CREATED: [],
        SessionState.GENERATED: [SessionEvent.IMAGE_GENERATED],
        SessionState.MASKED: [SessionEvent.IMAGE_GENERATED, SessionEvent.MASK_SET],
        SessionState.REFINED: [
            SessionEvent.IMAGE_GENERATED,
            SessionEvent.MASK_SET,
            SessionEvent.PROMPT_REFINED,
        ],
        SessionState.INPAINTED: [
            SessionEvent.IMAGE_GENERATED,
            SessionEvent.MASK_SET,
            SessionEvent.PROMPT_REFINED,
            SessionEvent.INPAINTED,
        ],
        SessionState.SCORED: [
            SessionEvent.IMAGE_GENERATED,
            SessionEvent.MASK_SET,
            SessionEvent.PROMPT_REFINED,
            SessionEvent.INPAINTED,
            SessionEvent.SCORED,
        ],
    }[state]
    for event in path:
        record = transition(record, event, now=clock())
    return record


# ---------------------------------------------------------------------------
# Raster type invariants
# ---------------------------------------------------------------------------


def test_raster_image_rejects_out_of_range_channels():
    with pytest.raises(ValidationFailure):
        RasterImage(np.full((4, 4, 3), 300, dtype=np.int32))


def test_raster_image_is_read_only():
    image = two_color_image(8, 8)
    with pytest.raises(ValueError):
        image.pixels[0, 0] = (1, 2, 3)


def test_binary_mask_rejects_non_binary_values():
    with pytest.raises(ValidationFailure):
        BinaryMask(np.full((4, 4), 2, dtype=np.uint8))


def test_mask_seed_bounds_checks():
    seed = MaskSeed.from_point(20, 3)
    with pytest.raises(ValidationFailure):
        seed.validate_for(16, 16)
    box = MaskSeed.from_box(5, 5, 2, 9)
    with pytest.raises(ValidationFailure):
        box.validate_for(16, 16)
    strokes = MaskSeed.from_strokes([Stroke(points=((1, 1),), radius=0)])
    with pytest.raises(ValidationFailure):
        strokes.validate_for(16, 16)  # gesture radius must be >= 1


def test_mask_seed_dict_round_trip():
    for seed in (
        MaskSeed.from_point(3, 4),
        MaskSeed.from_box(1, 2, 5, 6),
        MaskSeed.from_strokes([Stroke(points=((1, 1), (4, 4)), radius=2)]),
    ):
        assert MaskSeed.from_dict(seed.to_dict()) == seed


# ---------------------------------------------------------------------------
# validate_session
# ---------------------------------------------------------------------------


def test_fresh_session_is_valid():
    assert validate_session(fresh_record()) == []


def test_generated_without_image_reports_missing_artifact(fixed_clock):
    record = populated_record(SessionState.GENERATED, fixed_clock)
    broken = replace(record, initial_image=None)
    violations = validate_session(broken)
    assert [v.code for v in violations] == ["MissingArtifact"]
    assert violations[0].field == "initial_image"


def test_mask_dimension_mismatch_detected(fixed_clock):
    image = RasterImage(np.zeros((128, 128, 3), dtype=np.uint8))
    small_mask = BinaryMask(np.ones((64, 64), dtype=np.uint8))
    record = populated_record(SessionState.MASKED, fixed_clock)
    broken = replace(record, initial_image=image, mask=small_mask)
    codes = [v.code for v in validate_session(broken)]
    assert "DimensionMismatch" in codes


def test_bad_delta_detected():
    report = ScoreReport(
        prompt_used="p", initial_score=10.0, inpainted_score=12.0, delta=1.5, embedder_id="stub"
    )
    record = fresh_record(score_report=report)
    codes = [v.code for v in validate_session(record)]
    assert "InconsistentDelta" in codes


def test_state_without_history_is_illegal():
    record = fresh_record()
    broken = replace(record, state=SessionState.GENERATED, initial_image=two_color_image())
    codes = [v.code for v in validate_session(broken)]
    assert codes == ["IllegalHistory"]


# ---------------------------------------------------------------------------
# transition
# ---------------------------------------------------------------------------


def test_created_image_generated_reaches_generated(fixed_clock):
    record = fresh_record(initial_image=two_color_image())
    result = transition(record, SessionEvent.IMAGE_GENERATED, now=fixed_clock())
    assert result.state == SessionState.GENERATED
    assert len(result.history) == 1
    assert record.state == SessionState.CREATED  # input unchanged


def test_created_scored_is_illegal():
    with pytest.raises(IllegalTransition):
        transition(fresh_record(), SessionEvent.SCORED)


def test_restart_mask_returns_to_masked(fixed_clock):
    record = populated_record(SessionState.SCORED, fixed_clock)
    result = transition(record, SessionEvent.RESTART_MASK, now=fixed_clock())
    assert result.state == SessionState.MASKED
    assert len(result.history) == len(record.history) + 1
    assert result.initial_image is not None  # artifacts retained, not deleted


def test_transition_to_generated_without_image_raises():
    # never returns a silently invalid record
    with pytest.raises(IllegalTransition):
        transition(fresh_record(), SessionEvent.IMAGE_GENERATED)


def test_transition_is_pure_with_injected_clock(fixed_clock):
    record = fresh_record(initial_image=two_color_image())
    moment = fixed_clock()
    first = transition(record, SessionEvent.IMAGE_GENERATED, now=moment)
    second = transition(record, SessionEvent.IMAGE_GENERATED, now=moment)
    assert first == second


def test_full_relation_enumeration(fixed_clock):
    """All 36 (state, event) pairs behave exactly per the transition table."""
    observed_legal = set()
    for state in SessionState:
        for event in SessionEvent:
            record = populated_record(state, fixed_clock)
            try:
                result = transition(record, event, now=fixed_clock())
            except IllegalTransition:
                continue
            observed_legal.add((state, event))
            assert result.state == TRANSITIONS[(state, event)]
            assert validate_session(result) == []
            # history is a strict prefix-extension of the input history
            assert result.history[: len(record.history)] == record.history
            assert len(result.history) == len(record.history) + 1
    assert observed_legal == set(TRANSITIONS)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(list(SessionEvent)), max_size=12))
def test_random_event_walks_never_yield_invalid_records(events):
    from datetime import datetime, timedelta, timezone

    moment = datetime(2024, 5, 1, tzinfo=timezone.utc)
    image = two_color_image(16, 16)
    mask = BinaryMask(np.pad(np.ones((4, 4), np.uint8), ((0, 12), (0, 12))))
    record = fresh_record(
        initial_image=image,
        mask=mask,
        inpainted_image=image,
        score_report=ScoreReport.build("p", 1.0, 2.0, "stub"),
        prompts=replace(fresh_record().prompts, refined_prompt="refined"),
    )
    for event in events:
        moment += timedelta(seconds=1)
        before = record
        try:
            record = transition(record, event, now=moment)
        except IllegalTransition:
            record = before  # failed transition leaves the record unchanged
        assert validate_session(record) == []
        assert record.history[: len(before.history)] == before.history
