"""Scenario scripts: declarative synthetic scenes with ground truth.

A script is a plain-text sectioned file (see :func:`load_script`) declaring
the frame count, a noise model, and one block per person track. Scripts are
the test harness for the engine: they drive the simulator in
:mod:`facereid.providers` deterministically from a single seed.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from io import StringIO
from pathlib import Path

from .types import BoundingBox, FaceEmbedding


@dataclass(frozen=True)
class Trajectory:
    """Start box with per-frame linear motion and uniform positional jitter."""

    start_box: BoundingBox
    velocity: tuple[float, float] = (0.0, 0.0)
    jitter: float = 0.0

    def __post_init__(self):
        vx, vy = self.velocity
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise ValueError("trajectory velocity must be finite")
        if not math.isfinite(self.jitter) or self.jitter < 0:
            raise ValueError(f"trajectory jitter must be >= 0, got {self.jitter}")


@dataclass(frozen=True)
class PersonTrack:
    """One scripted person: present for frames enter_frame <= f < exit_frame.

    ``base_embedding`` is normally left unset and sampled uniformly on the
    unit sphere from the script seed; tests may pin an exact vector.
    """

    true_id: int
    enter_frame: int
    exit_frame: int
    trajectory: Trajectory
    base_embedding: FaceEmbedding | None = None

    def __post_init__(self):
        if self.true_id < 0:
            raise ValueError(f"true_id must be non-negative, got {self.true_id}")
        if not self.enter_frame < self.exit_frame:
            raise ValueError(
                f"person {self.true_id}: enter_frame {self.enter_frame} must be "
                f"< exit_frame {self.exit_frame}"
            )
        if self.enter_frame < 0:
            raise ValueError(f"person {self.true_id}: enter_frame must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    """Detector and embedding imperfections applied per person-frame.

    Occluded appearances get an embedding perturbed with
    ``occlusion_sigma`` (much larger than ``embedding_noise_sigma``) and a
    score drawn from the lower ``occluded_score_range``. False positives are
    spurious detections with fresh random embeddings, arriving at an
    expected rate per frame.
    """

    embedding_noise_sigma: float = 0.0
    occlusion_prob: float = 0.0
    occlusion_sigma: float = 1.0
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0
    score_range: tuple[float, float] = (0.75, 0.99)
    occluded_score_range: tuple[float, float] = (0.5, 0.8)

    def __post_init__(self):
        for name in ("embedding_noise_sigma", "occlusion_sigma", "false_positive_rate"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"noise {name} must be >= 0, got {value}")
        for name in ("occlusion_prob", "miss_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"noise {name} must be within [0, 1], got {value}")
        for name in ("score_range", "occluded_score_range"):
            low, high = getattr(self, name)
            if not 0.0 <= low <= high <= 1.0:
                raise ValueError(
                    f"noise {name} must satisfy 0 <= low <= high <= 1, got ({low}, {high})"
                )


@dataclass(frozen=True)
class ScenarioScript:
    """Complete description of a synthetic scene."""

    frame_count: int
    frame_size: tuple[int, int]
    persons: tuple[PersonTrack, ...]
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    fps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        if self.frame_count < 0:
            raise ValueError(f"frame_count must be >= 0, got {self.frame_count}")
        width, height = self.frame_size
        if width <= 0 or height <= 0:
            raise ValueError(f"frame_size must be positive, got {self.frame_size}")
        seen = set()
        for person in self.persons:
            if person.true_id in seen:
                raise ValueError(f"duplicate true_id {person.true_id}")
            seen.add(person.true_id)
            if person.exit_frame > self.frame_count:
                raise ValueError(
                    f"person {person.true_id}: span [{person.enter_frame}, "
                    f"{person.exit_frame}) exceeds frame_count {self.frame_count}"
                )
        if self.fps is not None and (not math.isfinite(self.fps) or self.fps <= 0):
            raise ValueError(f"fps must be positive, got {self.fps}")


def _format_float(value: float) -> str:
    return repr(float(value))


def save_script(script: ScenarioScript, path: str | Path) -> None:
    """Write a script in the sectioned key = value format."""
    parser = configparser.ConfigParser()
    parser["scenario"] = {
        "frames": str(script.frame_count),
        "width": str(script.frame_size[0]),
        "height": str(script.frame_size[1]),
        "seed": str(script.seed),
    }
    if script.fps is not None:
        parser["scenario"]["fps"] = _format_float(script.fps)
    noise = script.noise
    parser["noise"] = {
        "embedding_noise_sigma": _format_float(noise.embedding_noise_sigma),
        "occlusion_prob": _format_float(noise.occlusion_prob),
        "occlusion_sigma": _format_float(noise.occlusion_sigma),
        "miss_prob": _format_float(noise.miss_prob),
        "false_positive_rate": _format_float(noise.false_positive_rate),
        "score_range": f"{_format_float(noise.score_range[0])} {_format_float(noise.score_range[1])}",
        "occluded_score_range": (
            f"{_format_float(noise.occluded_score_range[0])} "
            f"{_format_float(noise.occluded_score_range[1])}"
        ),
    }
    for person in script.persons:
        box = person.trajectory.start_box
        parser[f"person {person.true_id}"] = {
            "enter": str(person.enter_frame),
            "exit": str(person.exit_frame),
            "box": " ".join(_format_float(v) for v in box.as_tuple()),
            "velocity": (
                f"{_format_float(person.trajectory.velocity[0])} "
                f"{_format_float(person.trajectory.velocity[1])}"
            ),
            "jitter": _format_float(person.trajectory.jitter),
        }
    buffer = StringIO()
    parser.write(buffer)
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


class ScriptError(ValueError):
    """Raised for unparseable or invalid scenario script files."""


def _floats(raw: str, count: int, where: str) -> list[float]:
    parts = raw.split()
    if len(parts) != count:
        raise ScriptError(f"{where}: expected {count} numbers, got {raw!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ScriptError(f"{where}: expected numbers, got {raw!r}") from None


def load_script(path: str | Path) -> ScenarioScript:
    """Parse a scenario script file; raises :class:`ScriptError` on problems."""
    parser = configparser.ConfigParser()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptError(f"cannot read script {path}: {exc}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScriptError(f"cannot parse script {path}: {exc}") from exc

    if "scenario" not in parser:
        raise ScriptError(f"{path}: missing [scenario] section")
    scenario = parser["scenario"]
    try:
        frame_count = scenario.getint("frames")
        width = scenario.getint("width")
        height = scenario.getint("height")
        seed = scenario.getint("seed", fallback=0)
        fps = scenario.getfloat("fps", fallback=None)
    except ValueError as exc:
        raise ScriptError(f"{path}: bad [scenario] value: {exc}") from exc
    if frame_count is None or width is None or height is None:
        raise ScriptError(f"{path}: [scenario] needs frames, width and height")

    noise = NoiseModel()
    if "noise" in parser:
        section = parser["noise"]
        known = {
            "embedding_noise_sigma",
            "occlusion_prob",
            "occlusion_sigma",
            "miss_prob",
            "false_positive_rate",
            "score_range",
            "occluded_score_range",
        }
        unknown = set(section) - known
        if unknown:
            raise ScriptError(f"{path}: unknown [noise] key(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for name in ("embedding_noise_sigma", "occlusion_prob", "occlusion_sigma",
                     "miss_prob", "false_positive_rate"):
            if name in section:
                kwargs[name] = section.getfloat(name)
        for name in ("score_range", "occluded_score_range"):
            if name in section:
                low, high = _floats(section[name], 2, f"{path} [noise] {name}")
                kwargs[name] = (low, high)
        try:
            noise = NoiseModel(**kwargs)
        except ValueError as exc:
            raise ScriptError(f"{path}: {exc}") from exc

    persons = []
    for section_name in parser.sections():
        if section_name in ("scenario", "noise"):
            continue
        parts = section_name.split()
        if len(parts) != 2 or parts[0] != "person" or not parts[1].isdigit():
            raise ScriptError(f"{path}: unexpected section [{section_name}]")
        section = parser[section_name]
        where = f"{path} [{section_name}]"
        try:
            x1, y1, x2, y2 = _floats(section["box"], 4, where)
            vx, vy = _floats(section.get("velocity", "0 0"), 2, where)
            track = PersonTrack(
                true_id=int(parts[1]),
                enter_frame=section.getint("enter"),
                exit_frame=section.getint("exit"),
                trajectory=Trajectory(
                    start_box=BoundingBox(x1, y1, x2, y2),
                    velocity=(vx, vy),
                    jitter=section.getfloat("jitter", fallback=0.0),
                ),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ScriptError):
                raise
            raise ScriptError(f"{where}: {exc}") from exc
        persons.append(track)

    try:
        return ScenarioScript(
            frame_count=frame_count,
            frame_size=(width, height),
            persons=tuple(persons),
            noise=noise,
            seed=seed,
            fps=fps,
        )
    except ValueError as exc:
        raise ScriptError(f"{path}: {exc}") from exc


def with_seed(script: ScenarioScript, seed: int) -> ScenarioScript:
    return replace(script, seed=seed)
