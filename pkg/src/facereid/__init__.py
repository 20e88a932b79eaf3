"""Streaming open-set face re-identification engine.

Detections are gated by confidence, matched against a growing identity
gallery by cosine distance, validated against recent face positions when
unmatched, and confirmed through a hold-queue post-filter. Every run can
write an anonymized, replayable analysis log from which per-identity story
catalogs are built offline.
"""

from .ablation import AblationConfig, AblationReport, ablation_grid, gamma, run_ablation
from .catalog import (
    CatalogError,
    CropManifest,
    HeaderRecord,
    LogFormatError,
    LogWriter,
    ObsRecord,
    EventRecord,
    StorySegment,
    SummaryRecord,
    apply_crops,
    build_segments,
    crop_manifest,
    presence_timeline,
    read_log,
    write_log,
)
from .pipeline import (
    EngineState,
    EventKind,
    FrameObservation,
    FramePacket,
    IdentityEvent,
    Outcome,
    RunHeader,
    RunSummary,
    process_frame,
    run,
)
from .providers import (
    FrameDirSource,
    ProviderError,
    ReplayError,
    SimFrame,
    engine_packets,
    frame_dir_source,
    replay,
    simulate,
    synthetic_source,
)
from .scenario import NoiseModel, PersonTrack, ScenarioScript, Trajectory, load_script, save_script
from .similarity import MatchResult, cosine_distance, match_identity
from .tracker import CandidateVerdict, iou, validate_candidate
from .types import (
    BoundingBox,
    EngineParams,
    FaceDetection,
    FaceEmbedding,
    Gallery,
    IdentityRecord,
    IdentityState,
    IdentityStateError,
    ValidationPolicy,
    validate_params,
)

__version__ = "0.1.0"
