"""Shared helpers: independent oracles and scenario factories."""

from __future__ import annotations

import math

import numpy as np
import pytest

from facereid import (
    BoundingBox,
    EngineParams,
    FaceDetection,
    FaceEmbedding,
    Gallery,
    IdentityState,
    NoiseModel,
    PersonTrack,
    ScenarioScript,
    Trajectory,
)


def unit(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    return arr / np.linalg.norm(arr)


def emb(vec) -> FaceEmbedding:
    return FaceEmbedding(vec)


def box(x1=0.0, y1=0.0, x2=10.0, y2=10.0) -> BoundingBox:
    return BoundingBox(x1, y1, x2, y2)


def det(b=None, score=0.9, frame=0, landmarks=None) -> FaceDetection:
    return FaceDetection(b or box(), score, frame, landmarks)


def gallery_of(vectors, states=None) -> Gallery:
    """Gallery with one record per raw vector, enrolled at frame 0."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    g = Gallery(embedding_dim=len(vectors[0]))
    for i, vec in enumerate(vectors):
        state = states[i] if states else IdentityState.ACTIVE
        if state is IdentityState.DISCARDED:
            record = g.enroll(emb(vec), 0, box(i * 20, 0, i * 20 + 10, 10), IdentityState.HELD)
            g.discard(record.id)
        else:
            g.enroll(emb(vec), 0, box(i * 20, 0, i * 20 + 10, 10), state)
    return g


def brute_force_match(query_raw, gallery_raws, tau_d, claimed=(), dead=()):
    """Independent nearest-identity scan from raw dot products and norms.

    Recomputes the cosine distance from unnormalized vectors instead of
    trusting pre-normalized embeddings. Returns (matched, id, distance).
    """
    best_id = None
    best_d = math.inf
    q = np.asarray(query_raw, dtype=np.float64)
    qn = math.sqrt(float(np.dot(q, q)))
    for i, raw in enumerate(gallery_raws):
        if i in claimed or i in dead:
            continue
        g = np.asarray(raw, dtype=np.float64)
        gn = math.sqrt(float(np.dot(g, g)))
        d = 1.0 - float(np.dot(q, g)) / (qn * gn)
        if d < best_d:
            best_d = d
            best_id = i
    if best_id is None:
        return False, None, math.inf
    if best_d < tau_d:
        return True, best_id, best_d
    return False, None, best_d


def pixel_grid_iou(a: BoundingBox, b: BoundingBox, step=1.0) -> float:
    """Counting oracle: rasterize both boxes on a unit grid."""
    x_lo = math.floor(min(a.x1, b.x1))
    x_hi = math.ceil(max(a.x2, b.x2))
    y_lo = math.floor(min(a.y1, b.y1))
    y_hi = math.ceil(max(a.y2, b.y2))
    inter = 0
    union = 0
    y = y_lo
    while y < y_hi:
        x = x_lo
        while x < x_hi:
            cx, cy = x + step / 2, y + step / 2
            in_a = a.x1 <= cx <= a.x2 and a.y1 <= cy <= a.y2
            in_b = b.x1 <= cx <= b.x2 and b.y1 <= cy <= b.y2
            if in_a and in_b:
                inter += 1
            if in_a or in_b:
                union += 1
            x += step
        y += step
    return inter / union if union else 0.0


def segments_oracle(frames, max_gap):
    """Gap-arithmetic oracle: split sorted frames where the gap exceeds max_gap."""
    if not frames:
        return []
    spans = []
    start = prev = frames[0]
    for f in frames[1:]:
        if f - prev - 1 > max_gap:
            spans.append((start, prev))
            start = f
        prev = f
    spans.append((start, prev))
    return spans


def clean_script(n_persons=2, frame_count=300, seed=5, fps=None) -> ScenarioScript:
    """Zero-noise scenario: the engine must find exactly one identity per person."""
    slots = [
        ((80.0, 80.0), (0.5, 0.1)),
        ((1000.0, 90.0), (-0.5, 0.15)),
        ((120.0, 430.0), (0.6, -0.2)),
        ((950.0, 420.0), (-0.6, -0.1)),
        ((500.0, 80.0), (0.1, 0.4)),
        ((520.0, 430.0), (0.0, -0.3)),
    ]
    persons = []
    for i in range(n_persons):
        (x, y), vel = slots[i % len(slots)]
        enter = i * 20
        persons.append(
            PersonTrack(
                true_id=i,
                enter_frame=enter,
                exit_frame=frame_count,
                trajectory=Trajectory(BoundingBox(x, y, x + 120, y + 144), vel, jitter=1.0),
            )
        )
    return ScenarioScript(
        frame_count=frame_count,
        frame_size=(1280, 720),
        persons=tuple(persons),
        noise=NoiseModel(),
        seed=seed,
        fps=fps,
    )


def noisy_script(seed=29, frame_count=600) -> ScenarioScript:
    """Four persons with occlusions, misses and false positives.

    Tuned so that with protection disabled the identity count inflates
    while the full configuration still recovers exactly the four people.
    """
    tracks = (
        PersonTrack(0, 0, 560, Trajectory(BoundingBox(80, 80, 200, 224), (0.6, 0.1), 2.0)),
        PersonTrack(1, 40, frame_count, Trajectory(BoundingBox(1000, 90, 1120, 234), (-0.5, 0.15), 2.0)),
        PersonTrack(2, 90, frame_count, Trajectory(BoundingBox(120, 430, 250, 586), (0.7, -0.2), 2.0)),
        PersonTrack(3, 140, 560, Trajectory(BoundingBox(950, 420, 1090, 588), (-0.6, -0.1), 2.0)),
    )
    return ScenarioScript(
        frame_count=frame_count,
        frame_size=(1280, 720),
        persons=tracks,
        noise=NoiseModel(
            embedding_noise_sigma=0.08,
            occlusion_prob=0.12,
            occlusion_sigma=1.2,
            miss_prob=0.04,
            false_positive_rate=0.05,
            score_range=(0.72, 0.99),
            occluded_score_range=(0.45, 0.78),
        ),
        seed=seed,
    )


@pytest.fixture
def small_params() -> EngineParams:
    return EngineParams(embedding_dim=64, t_min=60, min_hold_appearances=3)
