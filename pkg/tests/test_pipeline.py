import math
from dataclasses import replace

import numpy as np
import pytest

from facereid import (
    BoundingBox,
    EngineParams,
    EngineState,
    EventKind,
    FaceDetection,
    FaceEmbedding,
    FrameObservation,
    FramePacket,
    IdentityEvent,
    IdentityState,
    Outcome,
    ValidationPolicy,
    engine_packets,
    process_frame,
    run,
    simulate,
)

from conftest import box, clean_script, det, emb, noisy_script


def _state(**overrides) -> EngineState:
    params = EngineParams(embedding_dim=3, **overrides)
    return EngineState.new(params)


def _fixed_embedder(mapping):
    def embedder(detection):
        return mapping[id(detection)]
    return embedder


def _run_frames(state, frames):
    """frames: dict frame_index -> list of (detection, embedding)."""
    results = []
    for frame_index in sorted(frames):
        pairs = frames[frame_index]
        state.frame_index = frame_index
        mapping = {id(d): e for d, e in pairs}
        results.append(process_frame(state, [d for d, _ in pairs], _fixed_embedder(mapping)))
    return results


class TestGate:
    def test_below_threshold_rejected_without_embedding(self):
        state = _state(t_min=0)
        d = det(score=0.59)
        calls = []

        def embedder(detection):
            calls.append(detection)
            return emb([1, 0, 0])

        result = process_frame(state, [d], embedder)
        assert [o.outcome for o in result.observations] == [Outcome.REJECTED_LOW_SCORE]
        assert calls == []
        assert len(state.gallery) == 0

    def test_at_threshold_passes(self):
        state = _state(t_min=0)
        d = det(score=0.6)
        result = process_frame(state, [d], lambda _: emb([1, 0, 0]))
        assert result.observations[0].outcome is Outcome.ENROLLED

    def test_frame_index_mismatch_raises(self):
        state = _state()
        state.frame_index = 3
        with pytest.raises(ValueError, match="frame_index"):
            process_frame(state, [det(frame=2)], lambda _: emb([1, 0, 0]))


class TestEnrollment:
    def test_first_enrollment_immediate_active_when_post_filter_off(self):
        state = _state(t_min=0)
        result = process_frame(state, [det(score=0.9)], lambda _: emb([1, 0, 0]))
        obs = result.observations[0]
        assert obs.outcome is Outcome.ENROLLED
        assert obs.identity_id == 0
        assert obs.identity_state_at_emit is IdentityState.ACTIVE
        kinds = [(e.identity_id, e.kind) for e in result.events]
        assert kinds == [(0, EventKind.ENROLLED), (0, EventKind.ACTIVATED)]
        assert state.gallery.records[0].state is IdentityState.ACTIVE
        assert state.hold_queue == []

    def test_enrollment_goes_on_hold_when_post_filter_on(self):
        state = _state(t_min=10)
        result = process_frame(state, [det(score=0.9)], lambda _: emb([1, 0, 0]))
        record = state.gallery.records[0]
        assert record.state is IdentityState.HELD
        assert state.hold_queue == [(0, 10)]  # deadline = enrolled + t_min
        assert result.observations[0].identity_state_at_emit is IdentityState.HELD
        assert [e.kind for e in result.events] == [EventKind.ENROLLED]

    def test_enrolled_event_precedes_observation(self):
        state = _state(t_min=10)
        result = process_frame(state, [det(score=0.9)], lambda _: emb([1, 0, 0]))
        order = [type(i).__name__ for i in result.items]
        assert order.index("IdentityEvent") < order.index("FrameObservation")


class TestMatching:
    def test_match_updates_record(self):
        state = _state(t_min=0)
        e = emb([1, 0, 0])
        d0 = det(box(0, 0, 10, 10), 0.9, 0)
        process_frame(state, [d0], lambda _: e)
        state.frame_index = 1
        d1 = det(box(1, 0, 11, 10), 0.8, 1)
        result = process_frame(state, [d1], lambda _: e)
        obs = result.observations[0]
        assert obs.outcome is Outcome.MATCHED
        assert obs.identity_id == 0
        assert obs.distance == pytest.approx(0.0, abs=1e-12)
        record = state.gallery.records[0]
        assert record.last_seen_frame == 1
        assert record.last_box == box(1, 0, 11, 10)
        assert record.total_appearances == 2

    def test_exclusive_match_one_identity_per_frame(self):
        state = _state(t_min=0)
        e = emb([1, 0, 0])
        process_frame(state, [det(box(0, 0, 10, 10), 0.9, 0)], lambda _: e)
        state.frame_index = 1
        # two detections with the same embedding; only one may claim id 0
        d_hi = det(box(0, 0, 10, 10), 0.95, 1)
        d_lo = det(box(300, 300, 310, 310), 0.85, 1)
        mapping = {id(d_hi): e, id(d_lo): e}
        result = process_frame(state, [d_lo, d_hi], _fixed_embedder(mapping))
        outcomes = {o.detection.score: o.outcome for o in result.observations}
        assert outcomes[0.95] is Outcome.MATCHED  # higher score claims first
        assert outcomes[0.85] is not Outcome.MATCHED
        matched_ids = [o.identity_id for o in result.observations if o.outcome is Outcome.MATCHED]
        assert len(matched_ids) == len(set(matched_ids))

    def test_non_exclusive_allows_double_claim(self):
        state = _state(t_min=0, exclusive_match=False)
        e = emb([1, 0, 0])
        process_frame(state, [det(box(0, 0, 10, 10), 0.9, 0)], lambda _: e)
        state.frame_index = 1
        d1 = det(box(0, 0, 10, 10), 0.95, 1)
        d2 = det(box(300, 300, 310, 310), 0.85, 1)
        mapping = {id(d1): e, id(d2): e}
        result = process_frame(state, [d1, d2], _fixed_embedder(mapping))
        assert [o.outcome for o in result.observations] == [Outcome.MATCHED, Outcome.MATCHED]
        assert [o.identity_id for o in result.observations] == [0, 0]

    def test_suppressed_by_tracker(self):
        state = _state(t_min=0)
        b = box(0, 0, 10, 10)
        process_frame(state, [det(b, 0.9, 0)], lambda _: emb([1, 0, 0]))
        state.frame_index = 1
        # same position, far embedding: drift ghost, must be suppressed
        result = process_frame(state, [det(b, 0.9, 1)], lambda _: emb([0, 1, 0]))
        assert result.observations[0].outcome is Outcome.SUPPRESSED_BY_TRACKER
        assert len(state.gallery) == 1


class TestEmbedderFailures:
    def test_failure_skips_detection_but_frame_completes(self):
        state = _state(t_min=0)
        good = det(box(0, 0, 10, 10), 0.9, 0)
        bad = det(box(100, 100, 110, 110), 0.95, 0)

        def embedder(detection):
            if detection is bad:
                raise RuntimeError("crop failed")
            return emb([1, 0, 0])

        result = process_frame(state, [good, bad], embedder)
        assert result.embed_failures == 1
        assert [o.outcome for o in result.observations] == [Outcome.ENROLLED]
        assert len(state.gallery) == 1


class TestHoldLifecycle:
    def test_activation_exactly_at_deadline(self):
        state = _state(t_min=5, min_hold_appearances=2)
        e = emb([1, 0, 0])
        b = box(0, 0, 10, 10)
        frames = {
            0: [(det(b, 0.9, 0), e)],
            1: [(det(b, 0.9, 1), e)],
            2: [(det(b, 0.9, 2), e)],
            3: [], 4: [],
        }
        _run_frames(state, frames)
        record = state.gallery.records[0]
        assert record.state is IdentityState.HELD  # frame 4 < deadline 5
        assert record.hold_appearances == 2
        state.frame_index = 5
        result = process_frame(state, [], lambda _: e)
        assert record.state is IdentityState.ACTIVE
        assert result.events == [IdentityEvent(0, EventKind.ACTIVATED, 5)]
        assert state.hold_queue == []

    def test_discard_exactly_at_deadline(self):
        state = _state(t_min=5, min_hold_appearances=2)
        e = emb([1, 0, 0])
        frames = {0: [(det(box(0, 0, 10, 10), 0.9, 0), e)], 1: [], 2: [], 3: [], 4: []}
        _run_frames(state, frames)
        state.frame_index = 5
        result = process_frame(state, [], lambda _: e)
        record = state.gallery.records[0]
        assert record.state is IdentityState.DISCARDED
        assert result.events == [IdentityEvent(0, EventKind.DISCARDED, 5)]

    def test_match_on_deadline_frame_counts(self):
        state = _state(t_min=3, min_hold_appearances=1)
        e = emb([1, 0, 0])
        b = box(0, 0, 10, 10)
        frames = {0: [(det(b, 0.9, 0), e)], 1: [], 2: []}
        _run_frames(state, frames)
        assert state.gallery.records[0].hold_appearances == 0
        state.frame_index = 3
        result = process_frame(state, [(d := det(b, 0.9, 3))], _fixed_embedder({id(d): e}))
        record = state.gallery.records[0]
        assert record.hold_appearances == 1
        assert record.state is IdentityState.ACTIVE
        assert IdentityEvent(0, EventKind.ACTIVATED, 3) in result.events

    def test_enrollment_itself_does_not_count_toward_hold(self):
        state = _state(t_min=2, min_hold_appearances=1)
        e = emb([1, 0, 0])
        frames = {0: [(det(box(0, 0, 10, 10), 0.9, 0), e)], 1: [], 2: []}
        _run_frames(state, frames)
        assert state.gallery.records[0].state is IdentityState.DISCARDED

    def test_no_held_when_post_filter_off(self):
        script = clean_script(n_persons=3, frame_count=120)
        packets = engine_packets(simulate(script, embedding_dim=16))
        events = []
        summary = run(packets, EngineParams(embedding_dim=16, t_min=0), sink=events.append)
        assert summary.gallery["held"] == 0
        held_emits = [
            r for r in events
            if isinstance(r, FrameObservation) and r.identity_state_at_emit is IdentityState.HELD
        ]
        assert held_emits == []


class TestScenarioOracle:
    def test_two_person_clean_scenario_exact_identities(self):
        # zero noise: the engine must find exactly one identity per person
        # and every match must carry the right ground truth
        script = clean_script(n_persons=2, frame_count=300)
        sim_frames = list(simulate(script, embedding_dim=16))
        truth = {}
        for frame in sim_frames:
            for detection, true_id in zip(frame.detections, frame.true_ids):
                truth[id(detection)] = true_id

        observations = []
        summary = run(
            engine_packets(sim_frames),
            EngineParams(embedding_dim=16, t_min=30, min_hold_appearances=3),
            sink=lambda r: observations.append(r) if isinstance(r, FrameObservation) else None,
        )
        assert summary.gallery["active"] == 2
        assert summary.gallery["discarded"] == 0

        engine_to_truth = {}
        for obs in observations:
            if obs.outcome in (Outcome.MATCHED, Outcome.ENROLLED):
                true_id = truth[id(obs.detection)]
                prior = engine_to_truth.setdefault(obs.identity_id, true_id)
                assert prior == true_id, "one engine identity mixed two people"
        assert sorted(engine_to_truth.values()) == [0, 1]

    def test_four_person_clean_scenario(self):
        script = clean_script(n_persons=4, frame_count=300)
        summary = run(
            engine_packets(simulate(script, embedding_dim=16)),
            EngineParams(embedding_dim=16, t_min=60, min_hold_appearances=3),
        )
        assert summary.gallery["active"] == 4

    def test_degraded_configuration_inflates_identities(self):
        # no validation, no post-filter, noisy embeddings: strictly more
        # identities than people
        script = noisy_script()
        summary = run(
            engine_packets(simulate(script, embedding_dim=64)),
            EngineParams(
                embedding_dim=64,
                t_min=0,
                validation_policy=ValidationPolicy.OFF,
            ),
        )
        assert summary.gallery["active"] > 4


class TestRun:
    def test_empty_stream(self):
        records = []
        summary = run(iter(()), EngineParams(embedding_dim=8), sink=records.append)
        assert summary.frames == 0
        assert summary.gallery == {"held": 0, "active": 0, "discarded": 0}
        assert len(records) == 2  # header + summary only

    def test_source_error_truncates_cleanly(self):
        e = emb(np.eye(8)[0])

        def failing_source():
            d = det(score=0.9, frame=0)
            yield FramePacket(0, [d], lambda _: e)
            raise IOError("stream died")

        records = []
        summary = run(failing_source(), EngineParams(embedding_dim=8, t_min=0), sink=records.append)
        assert summary.truncated is True
        assert "stream died" in summary.error
        assert summary.frames == 1
        assert summary.gallery["active"] == 1
        assert records[-1] is summary  # partial log still closed by the summary

    def test_out_of_order_frames_truncate(self):
        e = emb(np.eye(8)[0])

        def source():
            d0 = det(score=0.9, frame=5)
            yield FramePacket(5, [d0], lambda _: e)
            d1 = det(score=0.9, frame=5)
            yield FramePacket(5, [d1], lambda _: e)

        summary = run(source(), EngineParams(embedding_dim=8, t_min=0))
        assert summary.truncated is True
        assert "strictly" in summary.error

    def test_outcome_counts_match_observations(self):
        script = noisy_script()
        observations = []
        summary = run(
            engine_packets(simulate(script, embedding_dim=64)),
            EngineParams(embedding_dim=64),
            sink=lambda r: observations.append(r) if isinstance(r, FrameObservation) else None,
        )
        for outcome in Outcome:
            got = sum(1 for o in observations if o.outcome is outcome)
            assert summary.outcomes[outcome.value] == got
        assert summary.frames == script.frame_count

    def test_determinism_identical_streams(self):
        script = noisy_script()
        params = EngineParams(embedding_dim=64)

        def capture():
            items = []
            run(
                engine_packets(simulate(script, embedding_dim=64)),
                params,
                sink=items.append,
                deterministic=True,
            )
            return items

        first, second = capture(), capture()
        assert len(first) == len(second)
        for a, b in zip(first, second):
            if isinstance(a, FrameObservation):
                assert a.frame_index == b.frame_index
                assert a.outcome == b.outcome
                assert a.identity_id == b.identity_id
                assert a.distance == b.distance  # bit-for-bit
                assert a.detection.box == b.detection.box
            else:
                assert a == b


class TestInvariants:
    def test_lifecycle_event_stream_invariants(self):
        # monotone non-discarded count except at discard events, monotone
        # active count, no id in two terminal states, held resolves exactly
        # at enrollment + t_min
        script = noisy_script()
        params = EngineParams(embedding_dim=64, t_min=40, min_hold_appearances=3)
        events = []
        run(
            engine_packets(simulate(script, embedding_dim=64)),
            params,
            sink=lambda r: events.append(r) if isinstance(r, IdentityEvent) else None,
        )
        assert events, "scenario produced no lifecycle events"

        enrolled_at = {}
        terminal = {}
        active = 0
        non_discarded = 0
        max_active = 0
        for event in events:
            if event.kind is EventKind.ENROLLED:
                assert event.identity_id not in enrolled_at
                enrolled_at[event.identity_id] = event.frame_index
                non_discarded += 1
            elif event.kind is EventKind.ACTIVATED:
                active += 1
                assert terminal.setdefault(event.identity_id, "active") == "active"
                if event.frame_index != enrolled_at[event.identity_id]:
                    assert event.frame_index == enrolled_at[event.identity_id] + params.t_min
            else:
                assert terminal.setdefault(event.identity_id, "discarded") == "discarded"
                assert event.frame_index == enrolled_at[event.identity_id] + params.t_min
                non_discarded -= 1
            assert active >= max_active  # active never decreases
            max_active = active
            assert non_discarded >= 0

    def test_no_duplicate_matched_identity_per_frame(self):
        script = noisy_script()
        per_frame: dict[int, list[int]] = {}
        run(
            engine_packets(simulate(script, embedding_dim=64)),
            EngineParams(embedding_dim=64),
            sink=lambda r: per_frame.setdefault(r.frame_index, []).append(r.identity_id)
            if isinstance(r, FrameObservation) and r.outcome is Outcome.MATCHED
            else None,
        )
        for frame, ids in per_frame.items():
            assert len(ids) == len(set(ids)), f"duplicate matched identity in frame {frame}"
