"""Passive tracking-by-detection support: IoU and new-identity validation.

The tracker is only consulted when embedding matching fails, never as an
active per-frame tracker. Two validation policies are available:

* ``overlap_reject`` (default): a candidate that sits almost exactly on top
  of a face seen in the previous frame(s) is taken to be embedding drift of
  that known person, not a new one, and is rejected. New faces are expected
  to enter the scene gradually, away from existing ones.
* ``continuity_confirm``: the inverse reading, where high overlap with a
  recent face is what confirms the candidate. Under this policy a genuinely
  new face appearing in an empty region is rejected; the policy exists so
  both semantics of the overlap test stay available behind one switch.
"""

from __future__ import annotations

from dataclasses import dataclass

from .types import BoundingBox, EngineParams, FaceDetection, Gallery, IdentityState, ValidationPolicy

RecentBoxes = dict[int, tuple[BoundingBox, int]]


@dataclass(frozen=True)
class CandidateVerdict:
    """Result of checking one unmatched detection against recent face positions."""

    valid: bool
    policy: ValidationPolicy
    nearest_id: int | None
    iou: float

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError(f"iou must be within [0, 1], got {self.iou}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def validate_candidate(
    candidate: FaceDetection,
    gallery: Gallery,
    params: EngineParams,
    recent_boxes: RecentBoxes,
) -> CandidateVerdict:
    """Decide whether an unmatched detection may enroll as a new identity.

    ``recent_boxes`` maps identity id to (last box, frame last seen); only
    entries of non-discarded identities seen within ``params.t_lookback``
    frames participate. The very first enrollment into an empty gallery is
    valid under every policy. Never mutates the gallery.
    """
    policy = params.validation_policy
    if not gallery.records:
        return CandidateVerdict(True, policy, None, 0.0)
    if policy is ValidationPolicy.OFF:
        return CandidateVerdict(True, policy, None, 0.0)

    cutoff = candidate.frame_index - params.t_lookback
    nearest_id: int | None = None
    nearest_iou = -1.0
    for identity_id in sorted(recent_boxes):
        box, seen_frame = recent_boxes[identity_id]
        if seen_frame < cutoff:
            continue
        if gallery.records[identity_id].state is IdentityState.DISCARDED:
            continue
        overlap = iou(candidate.box, box)
        if overlap > nearest_iou:
            nearest_id = identity_id
            nearest_iou = overlap

    if nearest_id is None:
        # Known identities exist but none was seen recently: nothing to
        # overlap with, so the overlap-reject reading lets the candidate in
        # while the continuity reading has nothing to confirm it.
        return CandidateVerdict(policy is ValidationPolicy.OVERLAP_REJECT, policy, None, 0.0)

    if policy is ValidationPolicy.OVERLAP_REJECT:
        valid = nearest_iou < params.tau_iou
    else:
        valid = nearest_iou >= params.tau_iou
    return CandidateVerdict(valid, policy, nearest_id, nearest_iou)
