"""Cosine distance and open-set nearest-identity matching against the gallery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection

import numpy as np

from .types import FaceEmbedding, Gallery


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one query against the gallery.

    ``matched`` holds exactly when ``identity_id`` is present, which holds
    exactly when ``distance`` fell below the threshold. ``distance`` is the
    minimum over candidates, or +inf when there were none.
    """

    matched: bool
    identity_id: int | None
    distance: float

    def __post_init__(self):
        if self.matched != (self.identity_id is not None):
            raise ValueError("matched must coincide with identity_id presence")


def cosine_distance(a: FaceEmbedding, b: FaceEmbedding) -> float:
    """Distance ``1 - cos(angle)`` between two unit-norm embeddings, in [0, 2]."""
    if a.dim != b.dim:
        raise ValueError(f"embedding dimension mismatch: {a.dim} != {b.dim}")
    return float(1.0 - np.dot(a.values, b.values))


def match_identity(
    query: FaceEmbedding,
    gallery: Gallery,
    tau_d: float,
    claimed: Collection[int] = (),
) -> MatchResult:
    """Nearest non-discarded gallery identity under cosine distance.

    Records in ``claimed`` (ids already matched this frame) are skipped.
    Ties at the minimal distance go to the lowest identity id. With no
    candidates at all the result is unmatched with an infinite distance.
    """
    matrix = gallery.embedding_matrix()
    if matrix.shape[0] == 0:
        return MatchResult(False, None, math.inf)
    if query.dim != matrix.shape[1]:
        raise ValueError(
            f"embedding dimension mismatch: query has {query.dim}, "
            f"gallery has {matrix.shape[1]}"
        )
    mask = gallery.live_mask().copy()
    for identity_id in claimed:
        if 0 <= identity_id < mask.shape[0]:
            mask[identity_id] = False
    if not mask.any():
        return MatchResult(False, None, math.inf)

    distances = 1.0 - matrix @ query.values
    distances[~mask] = np.inf
    best = int(np.argmin(distances))  # first minimum, so ties pick the lowest id
    best_distance = float(distances[best])
    if best_distance < tau_d:
        return MatchResult(True, best, best_distance)
    return MatchResult(False, None, best_distance)
