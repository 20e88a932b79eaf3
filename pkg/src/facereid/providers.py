"""Pluggable engine input sources.

Three sources produce :class:`~facereid.pipeline.FramePacket` streams:

* :func:`simulate` + :func:`engine_packets`: a deterministic synthetic scene
  with out-of-band ground truth, driven by a scenario script.
* :func:`replay`: the exact detection/embedding stream recorded in an
  analysis log, so expensive model inference runs only once.
* :func:`frame_dir_source`: a directory of image files plus caller-supplied
  detector/embedder providers. A model-backed provider only has to satisfy
  the two callables documented below; none ships here.

Detector provider contract: ``detector(image, frame_index)`` returns a list
of :class:`FaceDetection` for that frame (scores in [0, 1], optional
5-point landmarks). Embedder provider contract: ``embedder(image,
detection)`` returns a unit-norm :class:`FaceEmbedding` of the engine's
embedding dimension. The pipeline invokes embedders only for detections
that pass the confidence gate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .catalog import HeaderRecord, ObsRecord, SummaryRecord, read_log
from .imagefiles import list_image_files, load_image
from .pipeline import FramePacket, Outcome
from .scenario import ScenarioScript
from .types import BoundingBox, FaceDetection, FaceEmbedding

log = logging.getLogger(__name__)

DetectorProvider = Callable[[np.ndarray, int], list[FaceDetection]]
ImageEmbedderProvider = Callable[[np.ndarray, FaceDetection], FaceEmbedding]

# Sub-stream tags keep per-person embedding draws independent of iteration
# order; the generator algorithm (PCG64) is stable across platforms.
_PERSON_STREAM = 101
_NOISE_STREAM = 202


class ProviderError(RuntimeError):
    """A source could not produce the requested data."""


class ReplayError(ValueError):
    """The log cannot be replayed as an input stream."""


@dataclass
class SimFrame:
    """One simulated frame plus its out-of-band ground truth.

    ``true_ids`` aligns with ``detections``; false positives carry None.
    The engine-facing view (:func:`engine_packets`) strips all truth.
    """

    frame_index: int
    detections: list[FaceDetection]
    embeddings: list[FaceEmbedding]
    true_ids: list[int | None]
    occluded: list[bool]


def _landmarks_for(box: BoundingBox) -> tuple[tuple[float, float], ...]:
    w, h = box.width, box.height
    return (
        (box.x1 + 0.30 * w, box.y1 + 0.38 * h),
        (box.x1 + 0.70 * w, box.y1 + 0.38 * h),
        (box.x1 + 0.50 * w, box.y1 + 0.58 * h),
        (box.x1 + 0.35 * w, box.y1 + 0.78 * h),
        (box.x1 + 0.65 * w, box.y1 + 0.78 * h),
    )


def _unit_sphere(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.standard_normal(dim)
    norm = np.linalg.norm(vec)
    while norm < 1e-12:  # astronomically unlikely, but never divide by ~0
        vec = rng.standard_normal(dim)
        norm = np.linalg.norm(vec)
    return vec / norm


def base_embedding_for(script: ScenarioScript, true_id: int, dim: int) -> FaceEmbedding:
    """The person's enrollment-quality embedding, a pure function of the seed."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([script.seed, _PERSON_STREAM, true_id])
    ))
    return FaceEmbedding(_unit_sphere(rng, dim))


def _clamped_box(
    start: BoundingBox,
    offset_x: float,
    offset_y: float,
    frame_size: tuple[int, int],
) -> BoundingBox:
    w, h = start.width, start.height
    width, height = frame_size
    x1 = start.x1 + offset_x
    y1 = start.y1 + offset_y
    x1 = min(max(x1, 0.0), max(0.0, width - w))
    y1 = min(max(y1, 0.0), max(0.0, height - h))
    return BoundingBox(x1, y1, x1 + w, y1 + h)


def simulate(script: ScenarioScript, *, embedding_dim: int = 512) -> Iterator[SimFrame]:
    """Deterministic synthetic detection/embedding stream with ground truth.

    A pure function of (script, embedding_dim): repeated invocations yield
    identical streams. Embedding noise is added in raw space and
    renormalized, so every emitted embedding stays on the unit sphere; with
    zero noise a person's embeddings equal their base embedding exactly.
    """
    noise = script.noise
    bases = {
        person.true_id: (
            person.base_embedding
            if person.base_embedding is not None
            else base_embedding_for(script, person.true_id, embedding_dim)
        )
        for person in script.persons
    }
    for person in script.persons:
        if bases[person.true_id].dim != embedding_dim:
            raise ValueError(
                f"person {person.true_id}: base embedding dimension "
                f"{bases[person.true_id].dim} != {embedding_dim}"
            )
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([script.seed, _NOISE_STREAM])
    ))

    for frame in range(script.frame_count):
        detections: list[FaceDetection] = []
        embeddings: list[FaceEmbedding] = []
        true_ids: list[int | None] = []
        occluded_flags: list[bool] = []

        for person in script.persons:
            if not person.enter_frame <= frame < person.exit_frame:
                continue
            if noise.miss_prob > 0 and rng.random() < noise.miss_prob:
                continue
            traj = person.trajectory
            age = frame - person.enter_frame
            offset_x = traj.velocity[0] * age
            offset_y = traj.velocity[1] * age
            if traj.jitter > 0:
                offset_x += rng.uniform(-traj.jitter, traj.jitter)
                offset_y += rng.uniform(-traj.jitter, traj.jitter)
            box = _clamped_box(traj.start_box, offset_x, offset_y, script.frame_size)

            occluded = noise.occlusion_prob > 0 and rng.random() < noise.occlusion_prob
            base = bases[person.true_id]
            if occluded:
                raw = base.values + noise.occlusion_sigma * rng.standard_normal(base.dim)
                embedding = FaceEmbedding(raw)
                score = rng.uniform(*noise.occluded_score_range)
            elif noise.embedding_noise_sigma > 0:
                raw = base.values + noise.embedding_noise_sigma * rng.standard_normal(base.dim)
                embedding = FaceEmbedding(raw)
                score = rng.uniform(*noise.score_range)
            else:
                embedding = base
                score = rng.uniform(*noise.score_range)

            detections.append(
                FaceDetection(box, float(score), frame, _landmarks_for(box))
            )
            embeddings.append(embedding)
            true_ids.append(person.true_id)
            occluded_flags.append(occluded)

        if noise.false_positive_rate > 0:
            width, height = script.frame_size
            for _ in range(int(rng.poisson(noise.false_positive_rate))):
                size = rng.uniform(0.04, 0.15) * min(width, height)
                x1 = rng.uniform(0, max(width - size, 1.0))
                y1 = rng.uniform(0, max(height - size, 1.0))
                box = BoundingBox(x1, y1, x1 + size, y1 + size)
                embedding = FaceEmbedding(_unit_sphere(rng, embedding_dim))
                score = rng.uniform(*noise.score_range)
                detections.append(
                    FaceDetection(box, float(score), frame, _landmarks_for(box))
                )
                embeddings.append(embedding)
                true_ids.append(None)
                occluded_flags.append(False)

        yield SimFrame(frame, detections, embeddings, true_ids, occluded_flags)


class _TableEmbedder:
    """Embedder backed by precomputed per-detection embeddings."""

    __slots__ = ("_table",)

    def __init__(self, detections: list[FaceDetection], embeddings: Iterable[FaceEmbedding | None]):
        self._table = {
            id(det): emb for det, emb in zip(detections, embeddings) if emb is not None
        }

    def __call__(self, detection: FaceDetection) -> FaceEmbedding:
        embedding = self._table.get(id(detection))
        if embedding is None:
            raise ProviderError(
                f"no embedding available for a detection at frame {detection.frame_index}"
            )
        return embedding


def engine_packets(frames: Iterable[SimFrame]) -> Iterator[FramePacket]:
    """Engine-facing view of a simulation; ground truth is not reachable."""
    for frame in frames:
        yield FramePacket(
            frame.frame_index,
            list(frame.detections),
            _TableEmbedder(frame.detections, frame.embeddings),
        )


def synthetic_source(script: ScenarioScript, *, embedding_dim: int = 512) -> Iterator[FramePacket]:
    return engine_packets(simulate(script, embedding_dim=embedding_dim))


class ReplayStream:
    """Detection/embedding stream reconstructed from an analysis log.

    Iterating yields one packet per original frame, 0..frames-1, including
    frames that had no detections (they still drive hold-queue deadlines).
    """

    def __init__(self, header: HeaderRecord, packets: list[FramePacket]):
        self.header = header
        self._packets = packets

    def __iter__(self) -> Iterator[FramePacket]:
        return iter(self._packets)

    def __len__(self) -> int:
        return len(self._packets)


def replay(log_path: str | Path) -> ReplayStream:
    """Rebuild the exact engine input stream from a previously written log.

    Requires embeddings in the log for every detection that had one
    (everything except gate-rejected detections); the first record missing
    one is named in the error.
    """
    records = read_log(log_path)
    header = records[0]
    assert isinstance(header, HeaderRecord)
    summary = records[-1]
    assert isinstance(summary, SummaryRecord)

    per_frame: dict[int, list[tuple[FaceDetection, FaceEmbedding | None]]] = {}
    for position, record in enumerate(records, start=1):
        if not isinstance(record, ObsRecord):
            continue
        if record.frame >= summary.frames:
            raise ReplayError(
                f"record {position}: frame {record.frame} out of range "
                f"(summary says {summary.frames} frames)"
            )
        embedding = None
        if record.embedding is not None:
            embedding = FaceEmbedding(record.embedding)
        elif record.outcome != Outcome.REJECTED_LOW_SCORE.value:
            raise ReplayError(
                f"record {position} (frame {record.frame}, outcome {record.outcome}): "
                f"replay requires embeddings in the log; re-run analysis with "
                f"embeddings enabled"
            )
        detection = FaceDetection(
            BoundingBox(*record.box), record.score, record.frame, record.landmarks
        )
        per_frame.setdefault(record.frame, []).append((detection, embedding))

    packets = []
    for frame in range(summary.frames):
        pairs = per_frame.get(frame, [])
        detections = [det for det, _ in pairs]
        embeddings = [emb for _, emb in pairs]
        packets.append(FramePacket(frame, detections, _TableEmbedder(detections, embeddings)))
    return ReplayStream(header, packets)


class FrameDirSource:
    """Frames from a directory of image files, in numeric filename order.

    Detection and embedding are delegated to the supplied providers; the
    per-packet embedder is lazy, so only gate-surviving detections are
    embedded. Unreadable files are skipped with a warning and recorded in
    ``warnings`` (the run summary picks them up). Yielded frames are
    renumbered 0..n-1.
    """

    def __init__(
        self,
        directory: str | Path,
        detector: DetectorProvider,
        embedder: ImageEmbedderProvider,
    ):
        self.directory = Path(directory)
        self._detector = detector
        self._embedder = embedder
        self.warnings: list[str] = []

    def __iter__(self) -> Iterator[FramePacket]:
        frame_index = 0
        for path in list_image_files(self.directory):
            try:
                image = load_image(path)
            except OSError as exc:
                message = f"skipped unreadable frame file {path.name}: {exc}"
                self.warnings.append(message)
                log.warning("%s", message)
                continue
            detections = list(self._detector(image, frame_index))

            def embed(detection: FaceDetection, _image=image) -> FaceEmbedding:
                return self._embedder(_image, detection)

            yield FramePacket(frame_index, detections, embed)
            frame_index += 1


def frame_dir_source(
    directory: str | Path,
    detector: DetectorProvider,
    embedder: ImageEmbedderProvider,
) -> FrameDirSource:
    return FrameDirSource(directory, detector, embedder)
