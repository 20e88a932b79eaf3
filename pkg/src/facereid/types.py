"""Core domain types and engine parameters shared by all modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Sequence

import numpy as np

# A raw vector whose norm is already this close to 1 is stored as-is, so
# serialized embeddings survive a write/read/construct cycle bit for bit.
_NORM_SKIP_TOL = 1e-9


class ValidationPolicy(str, Enum):
    """How a new-identity candidate is checked against recent face positions."""

    OVERLAP_REJECT = "overlap_reject"
    CONTINUITY_CONFIRM = "continuity_confirm"
    OFF = "off"


class IdentityState(str, Enum):
    HELD = "held"
    ACTIVE = "active"
    DISCARDED = "discarded"


class IdentityStateError(RuntimeError):
    """Raised on an illegal identity lifecycle transition."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned region in pixel coordinates, origin at the top-left."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            value = getattr(self, name)
            try:
                finite = math.isfinite(value)
            except TypeError:
                finite = False
            if not finite:
                raise ValueError(f"bounding box {name} must be a finite number, got {value!r}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"bounding box must have positive area: "
                f"({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


class FaceEmbedding:
    """Unit-norm feature vector identifying one face appearance.

    The vector is normalized once at construction so downstream cosine
    distance reduces to ``1 - dot``. Inputs that are already unit norm are
    stored unchanged, which keeps log round-trips exact.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[float] | np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding components must all be finite")
        norm = float(np.linalg.norm(arr))
        if norm < 1e-12:
            raise ValueError("embedding must be nonzero")
        if abs(norm - 1.0) > _NORM_SKIP_TOL:
            arr = arr / norm
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.shape[0])

    def tolist(self) -> list[float]:
        return self._values.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, FaceEmbedding):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    __hash__ = None  # compared by value, never used as a dict key

    def __repr__(self) -> str:
        return f"FaceEmbedding(dim={self.dim})"


@dataclass(frozen=True)
class FaceDetection:
    """One detector hit: box, confidence and optional 5-point landmarks.

    Landmark order is left eye, right eye, nose, left mouth corner,
    right mouth corner.
    """

    box: BoundingBox
    score: float
    frame_index: int
    landmarks: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be within [0, 1], got {self.score!r}")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        if self.landmarks is not None:
            pts = tuple((float(x), float(y)) for x, y in self.landmarks)
            if len(pts) != 5:
                raise ValueError(f"landmarks must have exactly 5 points, got {len(pts)}")
            if not all(math.isfinite(x) and math.isfinite(y) for x, y in pts):
                raise ValueError("landmark coordinates must be finite")
            object.__setattr__(self, "landmarks", pts)

    @property
    def mouth_corners(self) -> tuple[tuple[float, float], tuple[float, float]] | None:
        if self.landmarks is None:
            return None
        return self.landmarks[3], self.landmarks[4]


@dataclass
class IdentityRecord:
    """Gallery entry: enrollment embedding plus lifecycle bookkeeping.

    The embedding is fixed at enrollment and never updated; only the
    last-seen box/frame and the appearance counters move.
    """

    id: int
    embedding: FaceEmbedding
    state: IdentityState
    enrolled_frame: int
    last_seen_frame: int
    last_box: BoundingBox
    hold_appearances: int = 0
    total_appearances: int = 1

    def record_match(self, frame_index: int, box: BoundingBox) -> None:
        if self.state is IdentityState.DISCARDED:
            raise IdentityStateError(f"identity {self.id} is discarded and cannot match")
        self.last_seen_frame = frame_index
        self.last_box = box
        self.total_appearances += 1
        if self.state is IdentityState.HELD:
            self.hold_appearances += 1

    def mark_active(self) -> None:
        if self.state is not IdentityState.HELD:
            raise IdentityStateError(
                f"identity {self.id} cannot become active from state {self.state.value}"
            )
        self.state = IdentityState.ACTIVE

    def mark_discarded(self) -> None:
        if self.state is not IdentityState.HELD:
            raise IdentityStateError(
                f"identity {self.id} cannot be discarded from state {self.state.value}"
            )
        self.state = IdentityState.DISCARDED


class Gallery:
    """Ordered identity store with dense enrollment-order ids.

    Ids are never reused, including for discarded records, so log records
    stay unambiguous. A contiguous embedding matrix is kept alongside the
    records to keep per-frame matching off the Python hot path.
    """

    def __init__(self, embedding_dim: int):
        if embedding_dim < 1:
            raise ValueError(f"embedding_dim must be >= 1, got {embedding_dim}")
        self.embedding_dim = int(embedding_dim)
        self.records: list[IdentityRecord] = []
        self._matrix = np.empty((0, self.embedding_dim), dtype=np.float64)
        self._live = np.empty(0, dtype=bool)

    @property
    def next_id(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def enroll(
        self,
        embedding: FaceEmbedding,
        frame_index: int,
        box: BoundingBox,
        state: IdentityState,
    ) -> IdentityRecord:
        if embedding.dim != self.embedding_dim:
            raise ValueError(
                f"embedding dimension mismatch: gallery expects {self.embedding_dim}, "
                f"got {embedding.dim}"
            )
        if state is IdentityState.DISCARDED:
            raise IdentityStateError("cannot enroll an identity in the discarded state")
        record = IdentityRecord(
            id=self.next_id,
            embedding=embedding,
            state=state,
            enrolled_frame=frame_index,
            last_seen_frame=frame_index,
            last_box=box,
        )
        self.records.append(record)
        self._matrix = np.vstack([self._matrix, embedding.values[np.newaxis, :]])
        self._live = np.append(self._live, True)
        return record

    def activate(self, identity_id: int) -> None:
        self.records[identity_id].mark_active()

    def discard(self, identity_id: int) -> None:
        self.records[identity_id].mark_discarded()
        self._live[identity_id] = False

    def embedding_matrix(self) -> np.ndarray:
        """Rows are embeddings in id order; includes discarded records."""
        return self._matrix

    def live_mask(self) -> np.ndarray:
        """Boolean row mask, False for discarded records."""
        return self._live

    def census(self) -> dict[str, int]:
        counts = {state.value: 0 for state in IdentityState}
        for record in self.records:
            counts[record.state.value] += 1
        return counts


@dataclass(frozen=True)
class EngineParams:
    """Engine thresholds and switches.

    ``tau_d`` is a cosine *distance* threshold (smaller is more similar);
    a similarity threshold s maps to ``tau_d = 1 - s``. ``t_min`` is the
    probation period in frames a freshly enrolled identity serves before
    confirmation; 0 disables post-filtering entirely.
    ``min_hold_appearances`` counts matches after enrollment, within the
    hold window. ``t_lookback`` is how many frames back a gallery face's
    last position still counts for candidate validation.
    """

    sigma_h: float = 0.6
    tau_d: float = 0.6
    tau_iou: float = 0.8
    t_min: int = 60
    min_hold_appearances: int = 3
    embedding_dim: int = 512
    validation_policy: ValidationPolicy = ValidationPolicy.OVERLAP_REJECT
    exclusive_match: bool = True
    t_lookback: int = 1


def validate_params(params: EngineParams) -> EngineParams:
    """Return ``params`` unchanged if every field is in range, else raise.

    The error message names the offending field.
    """
    checks = [
        ("sigma_h", 0.0 <= params.sigma_h <= 1.0, "within [0, 1]"),
        ("tau_d", 0.0 <= params.tau_d <= 2.0, "within [0, 2]"),
        ("tau_iou", 0.0 <= params.tau_iou <= 1.0, "within [0, 1]"),
        ("t_min", params.t_min >= 0, ">= 0"),
        ("min_hold_appearances", params.min_hold_appearances >= 1, ">= 1"),
        ("embedding_dim", params.embedding_dim >= 1, ">= 1"),
        ("t_lookback", params.t_lookback >= 1, ">= 1"),
    ]
    for name, ok, requirement in checks:
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValueError(f"{name} must be a number, got {value!r}")
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
        if not ok:
            raise ValueError(f"{name} must be {requirement}, got {value}")
    if not isinstance(params.validation_policy, ValidationPolicy):
        raise ValueError(
            f"validation_policy must be one of "
            f"{[p.value for p in ValidationPolicy]}, got {params.validation_policy!r}"
        )
    return params


def params_to_dict(params: EngineParams) -> dict:
    """Flat, serialization-friendly view in declaration order."""
    out = {}
    for f in fields(params):
        value = getattr(params, f.name)
        if isinstance(value, Enum):
            value = value.value
        out[f.name] = value
    return out


def params_from_dict(data: dict) -> EngineParams:
    """Inverse of :func:`params_to_dict`; unknown keys are rejected by name."""
    known = {f.name for f in fields(EngineParams)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    kwargs = dict(data)
    if "validation_policy" in kwargs and not isinstance(kwargs["validation_policy"], ValidationPolicy):
        try:
            kwargs["validation_policy"] = ValidationPolicy(kwargs["validation_policy"])
        except ValueError:
            raise ValueError(
                f"validation_policy must be one of {[p.value for p in ValidationPolicy]}, "
                f"got {kwargs['validation_policy']!r}"
            ) from None
    return EngineParams(**kwargs)
