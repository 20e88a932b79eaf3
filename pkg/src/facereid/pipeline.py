"""Frame-loop orchestration: gating, matching, candidate validation,
enrollment and the hold-queue post-filter lifecycle."""

from __future__ import annotations

import hashlib
import json
import logging
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from .similarity import match_identity
from .tracker import validate_candidate
from .types import (
    BoundingBox,
    EngineParams,
    FaceDetection,
    FaceEmbedding,
    Gallery,
    IdentityState,
    params_to_dict,
    validate_params,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

Embedder = Callable[[FaceDetection], FaceEmbedding]


class Outcome(str, Enum):
    REJECTED_LOW_SCORE = "rejected_low_score"
    MATCHED = "matched"
    ENROLLED = "enrolled"
    SUPPRESSED_BY_TRACKER = "suppressed_by_tracker"


class EventKind(str, Enum):
    ENROLLED = "enrolled"
    ACTIVATED = "activated"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class FrameObservation:
    """Per-detection result record.

    ``embedding`` is carried for detections that were embedded so the log
    can include it (and replays can reproduce the stream); gated detections
    never had one computed.
    """

    frame_index: int
    detection: FaceDetection
    outcome: Outcome
    identity_id: int | None = None
    distance: float | None = None
    identity_state_at_emit: IdentityState | None = None
    embedding: FaceEmbedding | None = None


@dataclass(frozen=True)
class IdentityEvent:
    identity_id: int
    kind: EventKind
    frame_index: int


@dataclass(frozen=True)
class RunHeader:
    """First record of every run; carries everything needed to interpret it."""

    format_version: int
    run_id: str
    deterministic: bool
    embedding_dim: int
    params: dict
    provider: dict
    fps: float | None
    embeddings_included: bool


@dataclass(frozen=True)
class RunSummary:
    """Last record of every run and the value :func:`run` returns."""

    frames: int
    outcomes: dict[str, int]
    gallery: dict[str, int]
    embed_failures: int = 0
    truncated: bool = False
    error: str | None = None
    warnings: tuple[str, ...] = ()
    wall_ms: float | None = None


@dataclass
class FrameResult:
    """Everything one frame produced, in emission order.

    ``items`` interleaves observations with lifecycle events so that an
    append-only log written in this order always introduces an identity
    before its first observation.
    """

    frame_index: int
    items: list[FrameObservation | IdentityEvent] = field(default_factory=list)
    embed_failures: int = 0

    @property
    def observations(self) -> list[FrameObservation]:
        return [i for i in self.items if isinstance(i, FrameObservation)]

    @property
    def events(self) -> list[IdentityEvent]:
        return [i for i in self.items if isinstance(i, IdentityEvent)]


@dataclass
class EngineState:
    """Mutable state owned by exactly one engine run."""

    params: EngineParams
    gallery: Gallery
    hold_queue: list[tuple[int, int]] = field(default_factory=list)  # (id, deadline frame)
    recent_boxes: dict[int, tuple[BoundingBox, int]] = field(default_factory=dict)
    frame_index: int = 0

    @classmethod
    def new(cls, params: EngineParams) -> "EngineState":
        params = validate_params(params)
        return cls(params=params, gallery=Gallery(params.embedding_dim))


def process_frame(
    state: EngineState,
    detections: list[FaceDetection],
    embedder: Embedder,
) -> FrameResult:
    """Run one frame through the full algorithm.

    Steps, in order: gate by detector confidence, embed the survivors,
    match them against the gallery (most confident first), validate and
    enroll the unmatched, expire due hold-queue entries, then advance the
    recent-box registry. An embedder failure skips that one detection and
    is counted; the frame still completes.
    """
    params = state.params
    frame = state.frame_index
    result = FrameResult(frame_index=frame)
    for det in detections:
        if det.frame_index != frame:
            raise ValueError(
                f"detection carries frame_index {det.frame_index}, engine is at {frame}"
            )

    survivors = []
    for det in detections:
        if det.score < params.sigma_h:
            result.items.append(
                FrameObservation(frame, det, Outcome.REJECTED_LOW_SCORE)
            )
        else:
            survivors.append(det)

    # Most confident face claims a contested identity first.
    survivors.sort(key=lambda d: -d.score)

    claimed: set[int] = set()
    seen_boxes: dict[int, BoundingBox] = {}
    for det in survivors:
        try:
            embedding = embedder(det)
        except Exception:
            log.warning("embedding provider failed for a detection at frame %d", frame, exc_info=True)
            result.embed_failures += 1
            continue

        match = match_identity(
            embedding,
            state.gallery,
            params.tau_d,
            claimed if params.exclusive_match else (),
        )
        if match.matched:
            record = state.gallery.records[match.identity_id]
            record.record_match(frame, det.box)
            if params.exclusive_match:
                claimed.add(record.id)
            seen_boxes[record.id] = det.box
            result.items.append(
                FrameObservation(
                    frame,
                    det,
                    Outcome.MATCHED,
                    identity_id=record.id,
                    distance=match.distance,
                    identity_state_at_emit=record.state,
                    embedding=embedding,
                )
            )
            continue

        verdict = validate_candidate(det, state.gallery, params, state.recent_boxes)
        if not verdict.valid:
            result.items.append(
                FrameObservation(
                    frame, det, Outcome.SUPPRESSED_BY_TRACKER, embedding=embedding
                )
            )
            continue

        enroll_state = IdentityState.HELD if params.t_min > 0 else IdentityState.ACTIVE
        record = state.gallery.enroll(embedding, frame, det.box, enroll_state)
        result.items.append(IdentityEvent(record.id, EventKind.ENROLLED, frame))
        if enroll_state is IdentityState.HELD:
            state.hold_queue.append((record.id, frame + params.t_min))
        else:
            result.items.append(IdentityEvent(record.id, EventKind.ACTIVATED, frame))
        if params.exclusive_match:
            claimed.add(record.id)
        seen_boxes[record.id] = det.box
        result.items.append(
            FrameObservation(
                frame,
                det,
                Outcome.ENROLLED,
                identity_id=record.id,
                identity_state_at_emit=record.state,
                embedding=embedding,
            )
        )

    # Hold expiry runs after this frame's detections, so a match landing on
    # the deadline frame still counts toward the appearance threshold.
    pending: list[tuple[int, int]] = []
    for identity_id, deadline in state.hold_queue:
        if deadline > frame:
            pending.append((identity_id, deadline))
            continue
        record = state.gallery.records[identity_id]
        if record.hold_appearances >= params.min_hold_appearances:
            state.gallery.activate(identity_id)
            result.items.append(IdentityEvent(identity_id, EventKind.ACTIVATED, frame))
        else:
            state.gallery.discard(identity_id)
            result.items.append(IdentityEvent(identity_id, EventKind.DISCARDED, frame))
    state.hold_queue = pending

    for identity_id, box in seen_boxes.items():
        state.recent_boxes[identity_id] = (box, frame)

    return result


class FramePacket:
    """One frame of engine input: detections plus a lazy embedder.

    The embedder is only invoked for detections that survive the confidence
    gate, so sources backed by a real model never embed gated detections.
    """

    __slots__ = ("frame_index", "detections", "embedder")

    def __init__(self, frame_index: int, detections: list[FaceDetection], embedder: Embedder):
        self.frame_index = frame_index
        self.detections = detections
        self.embedder = embedder


def _stable_run_id(params: EngineParams, provider: dict, embed_in_log: bool) -> str:
    payload = json.dumps(
        [FORMAT_VERSION, params_to_dict(params), provider, embed_in_log],
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def run(
    source: Iterable[FramePacket],
    params: EngineParams,
    sink: Callable[[object], None] | None = None,
    *,
    embed_in_log: bool = False,
    deterministic: bool = False,
    provider: dict | None = None,
    fps: float | None = None,
    run_id: str | None = None,
) -> RunSummary:
    """Process an entire stream frame by frame.

    Emits one header, every frame's observations and lifecycle events, and
    one summary to ``sink`` (when given), in order. A source failure or an
    out-of-order frame terminates the run cleanly: what was processed is
    kept and the summary is marked truncated. Returns the summary.
    """
    params = validate_params(params)
    provider = dict(provider or {"kind": "unspecified"})
    if run_id is None:
        run_id = (
            _stable_run_id(params, provider, embed_in_log)
            if deterministic
            else uuid.uuid4().hex[:12]
        )

    def emit(item) -> None:
        if sink is not None:
            sink(item)

    emit(
        RunHeader(
            format_version=FORMAT_VERSION,
            run_id=run_id,
            deterministic=deterministic,
            embedding_dim=params.embedding_dim,
            params=params_to_dict(params),
            provider=provider,
            fps=fps,
            embeddings_included=embed_in_log,
        )
    )

    state = EngineState.new(params)
    outcomes = {outcome.value: 0 for outcome in Outcome}
    frames = 0
    embed_failures = 0
    truncated = False
    error: str | None = None
    last_frame = -1
    started = time.perf_counter()

    stream = iter(source)
    while True:
        try:
            packet = next(stream)
        except StopIteration:
            break
        except Exception as exc:  # source failure: flush what we have
            log.warning("source failed after frame %d: %s", last_frame, exc)
            truncated = True
            error = f"source error: {exc}"
            break
        if packet.frame_index <= last_frame:
            truncated = True
            error = (
                f"source error: frame_index {packet.frame_index} not strictly "
                f"increasing after {last_frame}"
            )
            break
        last_frame = packet.frame_index

        state.frame_index = packet.frame_index
        result = process_frame(state, packet.detections, packet.embedder)
        embed_failures += result.embed_failures
        for item in result.items:
            if isinstance(item, FrameObservation):
                outcomes[item.outcome.value] += 1
            emit(item)
        frames += 1

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    warnings = tuple(getattr(source, "warnings", ()))
    summary = RunSummary(
        frames=frames,
        outcomes=outcomes,
        gallery=state.gallery.census(),
        embed_failures=embed_failures,
        truncated=truncated,
        error=error,
        warnings=warnings,
        wall_ms=None if deterministic else round(elapsed_ms, 3),
    )
    emit(summary)
    return summary
