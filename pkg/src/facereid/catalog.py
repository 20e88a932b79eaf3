"""The analysis log (write/read) and the identity catalogs built from it:
story segments, crop manifests, presence timelines.

The log is line-delimited JSON, UTF-8, one self-describing record per line.
It contains no image pixels, only face appearance data; embeddings are
included only when the run asked for them. A log is sufficient to rebuild
every catalog offline and, when embeddings are included, to replay the
exact detection stream through the engine again.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .imagefiles import list_image_files
from .pipeline import (
    FORMAT_VERSION,
    FrameObservation,
    IdentityEvent,
    Outcome,
    RunHeader,
    RunSummary,
)

log = logging.getLogger(__name__)

APPEARANCE_OUTCOMES = (Outcome.MATCHED.value, Outcome.ENROLLED.value)


class LogFormatError(ValueError):
    """Schema or ordering violation in an analysis log; knows its line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CatalogError(ValueError):
    """Catalog request that cannot be satisfied from the given log."""


# ---------------------------------------------------------------------------
# Log records


@dataclass(frozen=True)
class HeaderRecord:
    format_version: int
    run_id: str
    deterministic: bool
    embedding_dim: int
    params: dict
    provider: dict
    fps: float | None = None
    embeddings_included: bool = False


@dataclass(frozen=True)
class ObsRecord:
    frame: int
    outcome: str
    score: float
    box: tuple[float, float, float, float]
    identity_id: int | None = None
    distance: float | None = None
    landmarks: tuple[tuple[float, float], ...] | None = None
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class EventRecord:
    identity_id: int
    event: str
    frame: int


@dataclass(frozen=True)
class SummaryRecord:
    frames: int
    outcomes: dict
    gallery: dict
    embed_failures: int = 0
    truncated: bool = False
    error: str | None = None
    warnings: tuple[str, ...] = ()
    wall_ms: float | None = None


LogRecord = HeaderRecord | ObsRecord | EventRecord | SummaryRecord


def to_record(item, *, include_embeddings: bool = False) -> LogRecord:
    """Convert an engine-emitted object to its log record."""
    if isinstance(item, (HeaderRecord, ObsRecord, EventRecord, SummaryRecord)):
        return item
    if isinstance(item, RunHeader):
        return HeaderRecord(
            format_version=item.format_version,
            run_id=item.run_id,
            deterministic=item.deterministic,
            embedding_dim=item.embedding_dim,
            params=dict(item.params),
            provider=dict(item.provider),
            fps=item.fps,
            embeddings_included=item.embeddings_included,
        )
    if isinstance(item, FrameObservation):
        det = item.detection
        embedding = None
        if include_embeddings and item.embedding is not None:
            embedding = tuple(item.embedding.tolist())
        return ObsRecord(
            frame=item.frame_index,
            outcome=item.outcome.value,
            score=float(det.score),
            box=det.box.as_tuple(),
            identity_id=item.identity_id,
            distance=item.distance,
            landmarks=det.landmarks,
            embedding=embedding,
        )
    if isinstance(item, IdentityEvent):
        return EventRecord(identity_id=item.identity_id, event=item.kind.value, frame=item.frame_index)
    if isinstance(item, RunSummary):
        return SummaryRecord(
            frames=item.frames,
            outcomes=dict(item.outcomes),
            gallery=dict(item.gallery),
            embed_failures=item.embed_failures,
            truncated=item.truncated,
            error=item.error,
            warnings=tuple(item.warnings),
            wall_ms=item.wall_ms,
        )
    raise TypeError(f"cannot turn {type(item).__name__} into a log record")


def _dump(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def record_to_line(record: LogRecord) -> str:
    """One record as one JSON line; optional fields are omitted when unset."""
    if isinstance(record, HeaderRecord):
        payload = {
            "type": "header",
            "format_version": record.format_version,
            "run_id": record.run_id,
            "deterministic": record.deterministic,
            "embedding_dim": record.embedding_dim,
            "params": record.params,
            "provider": record.provider,
            "embeddings_included": record.embeddings_included,
        }
        if record.fps is not None:
            payload["fps"] = record.fps
        return _dump(payload)
    if isinstance(record, ObsRecord):
        payload = {
            "type": "obs",
            "frame": record.frame,
            "outcome": record.outcome,
            "score": record.score,
            "box": list(record.box),
        }
        if record.identity_id is not None:
            payload["identity_id"] = record.identity_id
        if record.distance is not None:
            payload["distance"] = record.distance
        if record.landmarks is not None:
            payload["landmarks"] = [list(p) for p in record.landmarks]
        if record.embedding is not None:
            payload["embedding"] = list(record.embedding)
        return _dump(payload)
    if isinstance(record, EventRecord):
        return _dump(
            {"type": "event", "id": record.identity_id, "event": record.event, "frame": record.frame}
        )
    if isinstance(record, SummaryRecord):
        payload = {
            "type": "summary",
            "frames": record.frames,
            "outcomes": record.outcomes,
            "gallery": record.gallery,
            "embed_failures": record.embed_failures,
            "truncated": record.truncated,
            "warnings": list(record.warnings),
        }
        if record.error is not None:
            payload["error"] = record.error
        if record.wall_ms is not None:
            payload["wall_ms"] = record.wall_ms
        return _dump(payload)
    raise TypeError(f"not a log record: {type(record).__name__}")


def _need(payload: dict, key: str, line: int):
    if key not in payload:
        raise LogFormatError(f"record is missing field {key!r}", line)
    return payload[key]


def _parse_record(payload: dict, line: int) -> LogRecord | None:
    kind = payload.get("type")
    if kind == "header":
        return HeaderRecord(
            format_version=int(_need(payload, "format_version", line)),
            run_id=str(_need(payload, "run_id", line)),
            deterministic=bool(_need(payload, "deterministic", line)),
            embedding_dim=int(_need(payload, "embedding_dim", line)),
            params=dict(_need(payload, "params", line)),
            provider=dict(_need(payload, "provider", line)),
            fps=payload.get("fps"),
            embeddings_included=bool(payload.get("embeddings_included", False)),
        )
    if kind == "obs":
        box = _need(payload, "box", line)
        if not isinstance(box, list) or len(box) != 4:
            raise LogFormatError("obs box must be a list of 4 numbers", line)
        landmarks = payload.get("landmarks")
        if landmarks is not None:
            landmarks = tuple((float(x), float(y)) for x, y in landmarks)
        embedding = payload.get("embedding")
        if embedding is not None:
            embedding = tuple(float(v) for v in embedding)
        outcome = str(_need(payload, "outcome", line))
        if outcome not in {o.value for o in Outcome}:
            raise LogFormatError(f"unknown obs outcome {outcome!r}", line)
        return ObsRecord(
            frame=int(_need(payload, "frame", line)),
            outcome=outcome,
            score=float(_need(payload, "score", line)),
            box=tuple(float(v) for v in box),
            identity_id=payload.get("identity_id"),
            distance=payload.get("distance"),
            landmarks=landmarks,
            embedding=embedding,
        )
    if kind == "event":
        event = str(_need(payload, "event", line))
        if event not in ("enrolled", "activated", "discarded"):
            raise LogFormatError(f"unknown event kind {event!r}", line)
        return EventRecord(
            identity_id=int(_need(payload, "id", line)),
            event=event,
            frame=int(_need(payload, "frame", line)),
        )
    if kind == "summary":
        return SummaryRecord(
            frames=int(_need(payload, "frames", line)),
            outcomes=dict(_need(payload, "outcomes", line)),
            gallery=dict(_need(payload, "gallery", line)),
            embed_failures=int(payload.get("embed_failures", 0)),
            truncated=bool(payload.get("truncated", False)),
            error=payload.get("error"),
            warnings=tuple(payload.get("warnings", ())),
            wall_ms=payload.get("wall_ms"),
        )
    if isinstance(kind, str):
        # Forward compatibility: newer writers may add record types.
        log.warning("skipping unknown log record type %r at line %d", kind, line)
        return None
    raise LogFormatError("record has no usable 'type' field", line)


class LogWriter:
    """Streaming single-producer sink turning engine output into log lines.

    Whether embeddings are written follows the run header passing through,
    unless overridden at construction.
    """

    def __init__(self, path: str | Path, include_embeddings: bool | None = None):
        self._file = open(path, "w", encoding="utf-8")
        self._include_embeddings = include_embeddings

    def __call__(self, item) -> None:
        self.write(item)

    def write(self, item) -> None:
        if isinstance(item, RunHeader) and self._include_embeddings is None:
            self._include_embeddings = item.embeddings_included
        record = to_record(item, include_embeddings=bool(self._include_embeddings))
        self._file.write(record_to_line(record) + "\n")

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "LogWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def write_log(records: Iterable, path: str | Path, *, include_embeddings: bool = True) -> None:
    """Write records (engine objects or log records) to one log file."""
    with LogWriter(path, include_embeddings=include_embeddings) as writer:
        for record in records:
            writer.write(record)


def read_log(path: str | Path) -> list[LogRecord]:
    """Read and validate a log file.

    Enforces the ordering invariants: exactly one header first, a summary
    last, and no observation of an identity before its enrolled event.
    Unknown record types are skipped with a warning. Raises
    :class:`LogFormatError` carrying the offending line number.
    """
    records: list[LogRecord] = []
    enrolled: set[int] = set()
    saw_summary = False
    line_no = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"invalid JSON: {exc.msg}", line_no) from exc
            if not isinstance(payload, dict):
                raise LogFormatError("record must be a JSON object", line_no)
            record = _parse_record(payload, line_no)
            if record is None:
                continue
            if saw_summary:
                raise LogFormatError("record found after the summary record", line_no)
            if not records and not isinstance(record, HeaderRecord):
                raise LogFormatError("first record must be the header", line_no)
            if records and isinstance(record, HeaderRecord):
                raise LogFormatError("duplicate header record", line_no)
            if isinstance(record, EventRecord):
                if record.event == "enrolled":
                    if record.identity_id in enrolled:
                        raise LogFormatError(
                            f"identity {record.identity_id} enrolled twice", line_no
                        )
                    enrolled.add(record.identity_id)
                elif record.identity_id not in enrolled:
                    raise LogFormatError(
                        f"{record.event} event for identity {record.identity_id} "
                        f"before its enrolled event",
                        line_no,
                    )
            if isinstance(record, ObsRecord) and record.identity_id is not None:
                if record.identity_id not in enrolled:
                    raise LogFormatError(
                        f"observation of identity {record.identity_id} before its "
                        f"enrolled event",
                        line_no,
                    )
            if isinstance(record, SummaryRecord):
                saw_summary = True
            records.append(record)
    if not records:
        raise LogFormatError("log is empty", max(line_no, 1))
    if not saw_summary:
        raise LogFormatError("log ended without a summary record", line_no + 1)
    return records


# ---------------------------------------------------------------------------
# Catalog views over a record sequence


def header_of(records: Sequence[LogRecord]) -> HeaderRecord | None:
    for record in records:
        if isinstance(record, HeaderRecord):
            return record
    return None


def summary_of(records: Sequence[LogRecord]) -> SummaryRecord | None:
    for record in reversed(records):
        if isinstance(record, SummaryRecord):
            return record
    return None


def final_states(records: Sequence[LogRecord]) -> dict[int, str]:
    """Identity id to final lifecycle state, derived from events.

    An identity with only an enrolled event was still held when the run
    ended.
    """
    states: dict[int, str] = {}
    for record in records:
        if isinstance(record, EventRecord):
            if record.event == "enrolled":
                states.setdefault(record.identity_id, "held")
            elif record.event == "activated":
                states[record.identity_id] = "active"
            elif record.event == "discarded":
                states[record.identity_id] = "discarded"
    return states


def appearance_frames(records: Sequence[LogRecord], identity_id: int) -> list[int]:
    """Sorted frames where the identity was matched or enrolled."""
    frames = {
        record.frame
        for record in records
        if isinstance(record, ObsRecord)
        and record.identity_id == identity_id
        and record.outcome in APPEARANCE_OUTCOMES
    }
    return sorted(frames)


@dataclass(frozen=True)
class StorySegment:
    """One contiguous appearance span of an identity, frames inclusive."""

    identity_id: int
    start_frame: int
    end_frame: int
    start_ms: float | None = None
    end_ms: float | None = None


def build_segments(
    records: Sequence[LogRecord],
    identity_id: int,
    max_gap_frames: int = 12,
    *,
    include_discarded: bool = False,
) -> list[StorySegment]:
    """Merge an identity's appearances into story segments.

    Consecutive appearances whose gap (frames strictly between them) is at
    most ``max_gap_frames`` belong to one segment. Identities that did not
    end active (discarded, or still held at the end) yield no segments
    unless ``include_discarded`` is set. Millisecond bounds are derived
    from the header fps when present.
    """
    if max_gap_frames < 0:
        raise ValueError(f"max_gap_frames must be >= 0, got {max_gap_frames}")
    states = final_states(records)
    if identity_id not in states:
        raise CatalogError(f"unknown identity id {identity_id}")
    if states[identity_id] != "active" and not include_discarded:
        return []
    frames = appearance_frames(records, identity_id)
    if not frames:
        return []
    header = header_of(records)
    fps = header.fps if header else None

    def _segment(start: int, end: int) -> StorySegment:
        if fps:
            return StorySegment(
                identity_id,
                start,
                end,
                start_ms=start / fps * 1000.0,
                end_ms=end / fps * 1000.0,
            )
        return StorySegment(identity_id, start, end)

    segments = []
    start = prev = frames[0]
    for frame in frames[1:]:
        if frame - prev - 1 > max_gap_frames:
            segments.append(_segment(start, prev))
            start = frame
        prev = frame
    segments.append(_segment(start, prev))
    return segments


def active_identity_ids(records: Sequence[LogRecord]) -> list[int]:
    return sorted(i for i, s in final_states(records).items() if s == "active")


def write_segments_csv(segments: Iterable[StorySegment], path: str | Path) -> None:
    lines = ["identity_id,start_frame,end_frame,start_ms,end_ms"]
    for seg in segments:
        start_ms = f"{seg.start_ms:.3f}" if seg.start_ms is not None else ""
        end_ms = f"{seg.end_ms:.3f}" if seg.end_ms is not None else ""
        lines.append(f"{seg.identity_id},{seg.start_frame},{seg.end_frame},{start_ms},{end_ms}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Crop manifests


@dataclass(frozen=True)
class CropRow:
    frame: int
    x1: float
    y1: float
    x2: float
    y2: float


@dataclass(frozen=True)
class CropManifest:
    identity_id: int
    mode: str  # "face" or "mouth"
    scale: tuple[int, int] | None
    rows: tuple[CropRow, ...]


def _clamp_box(
    x1: float, y1: float, x2: float, y2: float, frame_size: tuple[int, int] | None
) -> tuple[float, float, float, float] | None:
    x1, y1 = max(0.0, x1), max(0.0, y1)
    if frame_size is not None:
        width, height = frame_size
        x2, y2 = min(float(width), x2), min(float(height), y2)
    if x1 >= x2 or y1 >= y2:
        return None
    return x1, y1, x2, y2


def crop_manifest(
    records: Sequence[LogRecord],
    identity_id: int,
    mode: str = "face",
    *,
    scale: tuple[int, int] | None = None,
    face_margin: float = 0.2,
    mouth_expand_x: float = 0.6,
    mouth_expand_y: float = 0.5,
    include_discarded: bool = False,
) -> CropManifest:
    """Per-frame crop rectangles for one identity.

    Face mode expands the detection box by ``face_margin`` of its size on
    each side. Mouth mode spans the two mouth-corner landmarks, expanded by
    ``mouth_expand_x`` times the inter-corner distance on each horizontal
    side and ``mouth_expand_y`` vertically; it requires landmarks in the
    log. Rectangles are clamped to the frame bounds recorded in the header.
    """
    if mode not in ("face", "mouth"):
        raise CatalogError(f"unknown crop mode {mode!r}")
    states = final_states(records)
    if identity_id not in states:
        raise CatalogError(f"unknown identity id {identity_id}")
    if states[identity_id] != "active" and not include_discarded:
        return CropManifest(identity_id, mode, scale, ())

    header = header_of(records)
    frame_size = None
    if header is not None:
        raw = header.provider.get("frame_size")
        if isinstance(raw, (list, tuple)) and len(raw) == 2:
            frame_size = (int(raw[0]), int(raw[1]))

    obs = [
        record
        for record in records
        if isinstance(record, ObsRecord)
        and record.identity_id == identity_id
        and record.outcome in APPEARANCE_OUTCOMES
    ]
    obs.sort(key=lambda r: r.frame)

    rows: list[CropRow] = []
    missing_landmarks = 0
    for record in obs:
        if mode == "face":
            x1, y1, x2, y2 = record.box
            dx = (x2 - x1) * face_margin
            dy = (y2 - y1) * face_margin
            clamped = _clamp_box(x1 - dx, y1 - dy, x2 + dx, y2 + dy, frame_size)
        else:
            if record.landmarks is None or len(record.landmarks) != 5:
                missing_landmarks += 1
                continue
            (lx, ly), (rx, ry) = record.landmarks[3], record.landmarks[4]
            span = math.hypot(rx - lx, ry - ly)
            if span <= 0:
                missing_landmarks += 1
                continue
            clamped = _clamp_box(
                min(lx, rx) - mouth_expand_x * span,
                min(ly, ry) - mouth_expand_y * span,
                max(lx, rx) + mouth_expand_x * span,
                max(ly, ry) + mouth_expand_y * span,
                frame_size,
            )
        if clamped is None:
            continue
        rows.append(CropRow(record.frame, *clamped))

    if mode == "mouth" and not rows and (missing_landmarks or not obs):
        raise CatalogError(
            f"mouth mode requires landmarks in the log; identity {identity_id} "
            f"has none"
        )
    if missing_landmarks:
        log.warning(
            "identity %d: %d appearance(s) lack landmarks and were skipped",
            identity_id,
            missing_landmarks,
        )
    return CropManifest(identity_id, mode, scale, tuple(rows))


def write_manifest_csv(manifest: CropManifest, path: str | Path) -> None:
    out_w = manifest.scale[0] if manifest.scale else ""
    out_h = manifest.scale[1] if manifest.scale else ""
    lines = ["identity_id,frame,mode,x1,y1,x2,y2,out_w,out_h"]
    for row in manifest.rows:
        lines.append(
            f"{manifest.identity_id},{row.frame},{manifest.mode},"
            f"{row.x1:.2f},{row.y1:.2f},{row.x2:.2f},{row.y2:.2f},{out_w},{out_h}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class ApplyResult:
    written: list[Path]
    warnings: list[str]


def apply_crops(
    manifest: CropManifest, frame_directory: str | Path, out_directory: str | Path
) -> ApplyResult:
    """Cut (and optionally rescale) one image per manifest row.

    Frames are the image files of ``frame_directory`` in numeric filename
    order, row N of the run being file N. Output filenames encode identity
    and frame. Rows whose frame file is missing or unreadable are skipped
    with a warning.
    """
    frame_files = list_image_files(frame_directory)
    out_directory = Path(out_directory)
    out_directory.mkdir(parents=True, exist_ok=True)
    result = ApplyResult(written=[], warnings=[])
    for row in manifest.rows:
        if row.frame >= len(frame_files):
            result.warnings.append(f"frame {row.frame}: no image file")
            log.warning("frame %d: no image file in %s", row.frame, frame_directory)
            continue
        path = frame_files[row.frame]
        try:
            with Image.open(path) as img:
                image = img.convert("RGB")
        except OSError as exc:
            result.warnings.append(f"frame {row.frame}: unreadable image {path.name}: {exc}")
            log.warning("frame %d: unreadable image %s", row.frame, path)
            continue
        left = max(0, int(round(row.x1)))
        top = max(0, int(round(row.y1)))
        right = min(image.width, int(round(row.x2)))
        bottom = min(image.height, int(round(row.y2)))
        if left >= right or top >= bottom:
            result.warnings.append(f"frame {row.frame}: crop outside image bounds")
            continue
        crop = image.crop((left, top, right, bottom))
        if manifest.scale is not None:
            crop = crop.resize(manifest.scale, Image.BILINEAR)
        out_path = out_directory / (
            f"id{manifest.identity_id:04d}_frame{row.frame:06d}_{manifest.mode}.png"
        )
        crop.save(out_path)
        result.written.append(out_path)
    return result


# ---------------------------------------------------------------------------
# Presence timeline


@dataclass(frozen=True)
class PresenceTimeline:
    """Presence matrix: one row per active identity, one column per frame."""

    identity_ids: tuple[int, ...]
    frames: int
    matrix: np.ndarray  # bool, shape (len(identity_ids), frames)


def presence_timeline(records: Sequence[LogRecord]) -> PresenceTimeline:
    summary = summary_of(records)
    if summary is not None:
        frames = summary.frames
    else:
        frames = 1 + max(
            (r.frame for r in records if isinstance(r, ObsRecord)), default=-1
        )
    ids = tuple(active_identity_ids(records))
    matrix = np.zeros((len(ids), frames), dtype=bool)
    row_of = {identity_id: row for row, identity_id in enumerate(ids)}
    for record in records:
        if (
            isinstance(record, ObsRecord)
            and record.identity_id in row_of
            and record.outcome in APPEARANCE_OUTCOMES
            and 0 <= record.frame < frames
        ):
            matrix[row_of[record.identity_id], record.frame] = True
    return PresenceTimeline(ids, frames, matrix)


def write_presence_csv(timeline: PresenceTimeline, path: str | Path) -> None:
    columns = [str(f) for f in range(timeline.frames)]
    lines = [",".join(["identity_id"] + columns)]
    for row, identity_id in enumerate(timeline.identity_ids):
        cells = ["1" if v else "0" for v in timeline.matrix[row]]
        lines.append(",".join([str(identity_id)] + cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_PALETTE = (
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
)


def render_presence_svg(timeline: PresenceTimeline, path: str | Path) -> None:
    """Gantt-style on-screen presence chart, one bar row per identity."""
    label_width = 70
    row_height = 18
    row_gap = 6
    top = 24
    frames = max(timeline.frames, 1)
    px_per_frame = min(4.0, max(0.05, 880.0 / frames))
    chart_width = int(math.ceil(frames * px_per_frame))
    width = label_width + chart_width + 20
    height = top + len(timeline.identity_ids) * (row_height + row_gap) + 16

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{label_width}" y="16" font-family="sans-serif" font-size="12" '
        f'fill="#333">frames 0..{timeline.frames - 1 if timeline.frames else 0}</text>',
    ]
    for row, identity_id in enumerate(timeline.identity_ids):
        y = top + row * (row_height + row_gap)
        color = _PALETTE[row % len(_PALETTE)]
        parts.append(
            f'<text x="4" y="{y + row_height - 5}" font-family="sans-serif" '
            f'font-size="12" fill="#333">id {identity_id}</text>'
        )
        parts.append(
            f'<rect x="{label_width}" y="{y}" width="{chart_width}" '
            f'height="{row_height}" fill="#f0f0f0"/>'
        )
        presence = timeline.matrix[row]
        start = None
        for frame in range(timeline.frames + 1):
            present = frame < timeline.frames and presence[frame]
            if present and start is None:
                start = frame
            elif not present and start is not None:
                x = label_width + start * px_per_frame
                w = max((frame - start) * px_per_frame, 0.5)
                parts.append(
                    f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" '
                    f'height="{row_height}" fill="{color}"/>'
                )
                start = None
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
